use rayon::prelude::*;

use crate::erwvrp::{cumulative_second_moments, ErwvrpParams, SignWalker};
use crate::error::{invalid, Result};
use crate::params;
use crate::report::{Check, ExperimentReport, Table};
use crate::stats::{ks_statistic, mean_se, quantiles, variance};

pub const CLT_KS_LIMIT: f64 = 0.02;

/// `S_n` for replica `stream`, with precomputed weights `a_1..a_n`.
pub(crate) fn terminal_sum(p: f64, weights: &[f64], seed: u64, stream: u64) -> f64 {
    let mut walker = SignWalker::new(p, seed, stream).expect("validated p");
    weights.iter().map(|a| a * walker.next_sign() as f64).sum()
}

/// KS distance of `S_n / s_n` to `N(0, 1)` over independent replicas.
pub fn clt_experiment(params: &ErwvrpParams, n: usize, replicas: usize, seed: u64) -> Result<ExperimentReport> {
    if replicas < 1000 {
        return Err(invalid(format!("need at least 1000 replicas, got {replicas}")));
    }
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let weights = params.weights().values(n);
    let s_n = cumulative_second_moments(params.alpha(), &weights)[n].sqrt();
    if !(s_n > 0.0) {
        return Err(invalid("s_n vanishes"));
    }
    let samples: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| terminal_sum(params.p(), &weights, seed, i) / s_n)
        .collect();
    let mut report = ExperimentReport::new(
        "clt",
        params! {"p" => params.p(), "weights" => params.weights().kind().to_string(), "n" => n},
        seed,
        replicas as u64,
    );
    let ks = ks_statistic(&samples)?;
    report.check(Check::below("KS(S_n/s_n, N(0,1))", ks, CLT_KS_LIMIT));
    let (mean, se) = mean_se(&samples);
    report.check(Check::info("mean S_n/s_n", mean));
    report.check(Check::info("SE of mean", se));
    report.check(Check::info("variance S_n/s_n", variance(&samples)));
    report.check(Check::info("s_n^2", s_n * s_n));
    let qs = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];
    let mut t = Table::new("quantiles", &["q", "empirical"]);
    for (q, v) in qs.iter().zip(quantiles(&samples, &qs)) {
        t.push(vec![*q, v]);
    }
    report.table(t);
    let mut ecdf = Table::new("samples", &["stream", "normalized_sum"]);
    for (i, v) in samples.iter().enumerate() {
        ecdf.push(vec![i as f64, *v]);
    }
    report.table(ecdf);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightSequence;

    #[test]
    fn iid_case_passes() {
        let p = ErwvrpParams::new(0.5, WeightSequence::constant(), 2000).unwrap();
        let r = clt_experiment(&p, 2000, 4000, 11).unwrap();
        assert!(r.find("KS(S_n/s_n, N(0,1))").unwrap().value < 0.03);
        assert!(clt_experiment(&p, 2000, 999, 11).is_err());
    }

    #[test]
    fn deterministic_across_pools() {
        let p = ErwvrpParams::new(0.75, WeightSequence::power(0.5).unwrap(), 500).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| clt_experiment(&p, 500, 1000, 3).unwrap())
        };
        assert_eq!(run(1).to_json(), run(4).to_json());
    }
}
