//! Run configuration: `key=value` text with a fixed canonical form.
//!
//! Grammar: one `key=value` per line, blank lines and lines starting with `#`
//! ignored, whitespace around keys and values trimmed, each key at most once.
//! Every key except `experiment` has a default. Lists are comma separated.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::blocking::{Anchor, GordinOptions};
use crate::error::{invalid, Result};
use crate::limits::Normalization;
use crate::point::TorusPoint;
use crate::report::hash_hex;
use crate::weights::{WeightKind, WeightSequence};

/// Environment variable holding the default output directory.
pub const OUT_ENV: &str = "TAKAGI_LAB_OUT";
const DEFAULT_OUT: &str = "runs";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Eval,
    Simulate,
    Blocks,
    Clt,
    Lil,
    Chung,
    Modulus,
    Fclt,
    ValidateWeights,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Eval,
        ExperimentKind::Simulate,
        ExperimentKind::Blocks,
        ExperimentKind::Clt,
        ExperimentKind::Lil,
        ExperimentKind::Chung,
        ExperimentKind::Modulus,
        ExperimentKind::Fclt,
        ExperimentKind::ValidateWeights,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Eval => "eval",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Blocks => "blocks",
            ExperimentKind::Clt => "clt",
            ExperimentKind::Lil => "lil",
            ExperimentKind::Chung => "chung",
            ExperimentKind::Modulus => "modulus",
            ExperimentKind::Fclt => "fclt",
            ExperimentKind::ValidateWeights => "validate-weights",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
            invalid(format!("unknown experiment kind {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    /// Base of the fractal function.
    pub r: u32,
    pub weights: WeightKind,
    /// Memory parameter of the walk.
    pub p: f64,
    pub delta: f64,
    /// Horizon: walk length, `n_max`, or the functional-CLT level.
    pub n: usize,
    /// Number of blocks.
    pub blocks: usize,
    pub replicas: usize,
    /// Uniform-`x` sample count.
    pub samples: usize,
    pub seed: u64,
    pub x: TorusPoint,
    pub eps: f64,
    /// Scales `m` with `h = r^{-m}`, increasing.
    pub levels: Vec<u32>,
    pub t: Vec<f64>,
    pub beta: f64,
    pub normalization: Normalization,
    pub anchor: Anchor,
    pub offset: u32,
    /// Ratio in the exponential growth bound.
    pub q: f64,
    pub out: PathBuf,
    pub svg: bool,
    /// Rayon pool size; 0 keeps the rayon default.
    pub workers: usize,
}

/// Keys in canonical order.
pub const KEYS: [&str; 22] = [
    "experiment", "r", "weights", "p", "delta", "n", "blocks", "replicas", "samples", "seed", "x", "eps", "levels",
    "t", "beta", "normalization", "anchor", "offset", "q", "out", "svg", "workers",
];

/// Keys that never change report content.
const EXECUTION_KEYS: [&str; 3] = ["out", "svg", "workers"];

fn default_out() -> PathBuf {
    std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn anchor_name(a: Anchor) -> &'static str {
    match a {
        Anchor::PrecedingBlockEnd => "preceding",
        Anchor::DisplayedIndex => "displayed",
    }
}

fn parse_anchor(s: &str) -> Result<Anchor> {
    match s {
        "preceding" => Ok(Anchor::PrecedingBlockEnd),
        "displayed" => Ok(Anchor::DisplayedIndex),
        other => Err(invalid(format!("unknown anchor {other:?}; expected preceding or displayed"))),
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| invalid(format!("bad value {v:?} for {key}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| parse_num(key, s.trim())).collect()
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Defaults for everything but the experiment kind.
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            r: 2,
            weights: WeightKind::Constant { value: 1.0 },
            p: 0.75,
            delta: 1.0,
            n: 5000,
            blocks: 51,
            replicas: 1000,
            samples: 100_000,
            seed: 7,
            x: TorusPoint::zero(),
            eps: 1e-12,
            levels: vec![20],
            t: vec![0.25, 0.5, 1.0],
            beta: 1.0,
            normalization: Normalization::Energy,
            anchor: Anchor::PrecedingBlockEnd,
            offset: 1,
            q: 2.0,
            out: default_out(),
            svg: false,
            workers: 0,
        }
    }

    /// Parses `key=value` text; see the module docs for the grammar.
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    /// Builds a config from a key map; `experiment` is required.
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let kind = pairs.get("experiment").ok_or_else(|| invalid("missing experiment kind"))?;
        let mut cfg = Self::new(kind.parse()?);
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let v = v.trim();
        match key {
            "experiment" => self.experiment = v.parse()?,
            "r" => self.r = parse_num(key, v)?,
            "weights" => self.weights = v.parse()?,
            "p" => self.p = parse_num(key, v)?,
            "delta" => self.delta = parse_num(key, v)?,
            "n" => self.n = parse_num(key, v)?,
            "blocks" => self.blocks = parse_num(key, v)?,
            "replicas" => self.replicas = parse_num(key, v)?,
            "samples" => self.samples = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "x" => self.x = v.parse()?,
            "eps" => self.eps = parse_num(key, v)?,
            "levels" => self.levels = parse_list(key, v)?,
            "t" => self.t = parse_list(key, v)?,
            "beta" => self.beta = parse_num(key, v)?,
            "normalization" => self.normalization = v.parse()?,
            "anchor" => self.anchor = parse_anchor(v)?,
            "offset" => self.offset = parse_num(key, v)?,
            "q" => self.q = parse_num(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "svg" => self.svg = parse_num(key, v)?,
            "workers" => self.workers = parse_num(key, v)?,
            other => return Err(invalid(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Range checks shared by every experiment.
    pub fn validate(&self) -> Result<()> {
        if self.r < 2 {
            return Err(invalid(format!("r must be at least 2, got {}", self.r)));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(invalid(format!("p must lie in (0, 1), got {}", self.p)));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1], got {}", self.delta)));
        }
        if self.n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        if !(self.eps > 0.0) {
            return Err(invalid(format!("eps must be positive, got {}", self.eps)));
        }
        if self.levels.is_empty() || self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("levels must be a non-empty increasing list"));
        }
        if self.t.is_empty() || self.t.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return Err(invalid("t values must lie in (0, 1]"));
        }
        if !(self.beta > 0.0) {
            return Err(invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.q > 1.0) {
            return Err(invalid(format!("q must exceed 1, got {}", self.q)));
        }
        WeightSequence::new(self.weights.clone())?;
        Ok(())
    }

    fn value(&self, key: &str) -> String {
        match key {
            "experiment" => self.experiment.to_string(),
            "r" => self.r.to_string(),
            "weights" => self.weights.to_string(),
            "p" => format!("{:?}", self.p),
            "delta" => format!("{:?}", self.delta),
            "n" => self.n.to_string(),
            "blocks" => self.blocks.to_string(),
            "replicas" => self.replicas.to_string(),
            "samples" => self.samples.to_string(),
            "seed" => self.seed.to_string(),
            "x" => self.x.to_string(),
            "eps" => format!("{:?}", self.eps),
            "levels" => join(&self.levels),
            "t" => self.t.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(","),
            "beta" => format!("{:?}", self.beta),
            "normalization" => self.normalization.to_string(),
            "anchor" => anchor_name(self.anchor).to_string(),
            "offset" => self.offset.to_string(),
            "q" => format!("{:?}", self.q),
            "out" => self.out.display().to_string(),
            "svg" => self.svg.to_string(),
            "workers" => self.workers.to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }

    /// Every key in fixed order; `parse(canonical())` reproduces the config.
    pub fn canonical(&self) -> String {
        KEYS.iter().map(|k| format!("{k}={}\n", self.value(k))).collect()
    }

    /// The canonical text without execution-only keys.
    pub fn manifest_text(&self) -> String {
        KEYS.iter()
            .filter(|k| !EXECUTION_KEYS.contains(k))
            .map(|k| format!("{k}={}\n", self.value(k)))
            .collect()
    }

    pub fn config_hash(&self) -> String {
        hash_hex(&self.manifest_text())
    }

    pub fn weight_sequence(&self) -> Result<WeightSequence> {
        WeightSequence::new(self.weights.clone())
    }

    pub fn gordin_options(&self) -> GordinOptions {
        GordinOptions { anchor: self.anchor, exponent_offset: self.offset, ..GordinOptions::default() }
    }
}

/// Splits config text into a key map, rejecting malformed lines and repeats.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| invalid(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(invalid(format!("line {}: unknown config key {k:?}", i + 1)));
        }
        if map.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(invalid(format!("line {}: duplicate key {k:?}", i + 1)));
        }
    }
    Ok(map)
}
