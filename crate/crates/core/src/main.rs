use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use takagi_lab::cli::{config::parse_pairs, run, RunConfig};

#[derive(Parser)]
#[command(name = "takagi-lab", version, about = "Weighted Takagi functions and elephant random walks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its report directory.
    Run(ConfigArgs),
    /// Print the canonical config and its hash without running.
    Manifest(ConfigArgs),
}

/// Values are parsed by the config layer, so flags and config files share
/// one grammar.
#[derive(Args)]
struct ConfigArgs {
    /// eval | simulate | blocks | clt | lil | chung | modulus | fclt | validate-weights
    kind: Option<String>,
    /// key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    r: Option<String>,
    /// const[:v] | power:beta | alternating[:v] | odd | geometric:q | explicit:a,b,... | JSON
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    blocks: Option<String>,
    #[arg(long)]
    replicas: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// p/q, r^-m or a decimal.
    #[arg(long)]
    x: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    /// Comma separated m with h = r^-m.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// exact_s | scaled_a | energy
    #[arg(long)]
    normalization: Option<String>,
    /// preceding | displayed
    #[arg(long)]
    anchor: Option<String>,
    #[arg(long)]
    offset: Option<String>,
    #[arg(long)]
    q: Option<String>,
    /// Output directory [env: TAKAGI_LAB_OUT, default: runs].
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    svg: bool,
    #[arg(long)]
    workers: Option<String>,
}

impl ConfigArgs {
    fn into_config(self) -> takagi_lab::Result<RunConfig> {
        let mut pairs = match &self.config {
            Some(path) => parse_pairs(&std::fs::read_to_string(path)?)?,
            None => BTreeMap::new(),
        };
        let flags = [
            ("experiment", self.kind),
            ("r", self.r),
            ("weights", self.weights),
            ("p", self.p),
            ("delta", self.delta),
            ("n", self.n),
            ("blocks", self.blocks),
            ("replicas", self.replicas),
            ("samples", self.samples),
            ("seed", self.seed),
            ("x", self.x),
            ("eps", self.eps),
            ("levels", self.levels),
            ("t", self.t),
            ("beta", self.beta),
            ("normalization", self.normalization),
            ("anchor", self.anchor),
            ("offset", self.offset),
            ("q", self.q),
            ("out", self.out),
            ("svg", self.svg.then(|| "true".to_string())),
            ("workers", self.workers),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                pairs.insert(k.to_string(), v);
            }
        }
        RunConfig::from_pairs(&pairs)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (args, dry) = match cli.command {
        Command::Run(a) => (a, false),
        Command::Manifest(a) => (a, true),
    };
    let cfg = match args.into_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if dry {
        print!("{}", cfg.manifest_text());
        println!("hash={}", cfg.config_hash());
        return ExitCode::SUCCESS;
    }
    match run(&cfg, &mut std::io::stdout().lock()) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
