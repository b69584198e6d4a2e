use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use takagi_lab::erwvrp::{
    doob_decompose, exact_second_moment, exact_second_moment_with, k_of_p, MomentMethod, SignWalker,
};
use takagi_lab::stats::mean_se;
use takagi_lab::{ErwvrpParams, StreamRng, WeightKind, WeightSequence};

fn random_weights(rng: &mut StreamRng) -> WeightSequence {
    let kind = match (rng.uniform() * 4.0) as u32 {
        0 => WeightKind::Power { beta: rng.uniform() * 2.0 - 0.5 },
        1 => WeightKind::Explicit { values: (0..300).map(|_| rng.standard_normal()).collect() },
        2 => WeightKind::Alternating { value: 0.1 + rng.uniform() },
        _ => WeightKind::Constant { value: 0.1 + 3.0 * rng.uniform() },
    };
    WeightSequence::new(kind).unwrap()
}

#[test]
fn variance_sandwich_for_random_generators() {
    let mut rng = StreamRng::new(2024, 0);
    for _ in 0..100 {
        let seq = random_weights(&mut rng);
        let p = 0.02 + 0.96 * rng.uniform();
        let k = k_of_p(p).unwrap();
        let params = ErwvrpParams::new(p, seq.clone(), 400).unwrap();
        for _ in 0..100 {
            let a = (rng.uniform() * 399.0) as usize;
            let b = a + 1 + (rng.uniform() * (399 - a) as f64) as usize;
            let energy = seq.partial_energy(b) - seq.partial_energy(a);
            let v = exact_second_moment(&params, a, b).unwrap();
            let slack = 1e-10 * energy.max(v);
            assert!(energy / k <= v + slack && v <= k * energy + slack, "p={p} m={a} n={b}: {v} vs {energy}");
        }
    }
}

#[test]
fn recursion_agrees_with_double_sum() {
    let params = ErwvrpParams::new(0.3, WeightSequence::power(0.7).unwrap(), 600).unwrap();
    for (m, n) in [(0, 1), (0, 600), (17, 311), (599, 600)] {
        let fast = exact_second_moment_with(&params, m, n, MomentMethod::Recursive).unwrap();
        let slow = exact_second_moment_with(&params, m, n, MomentMethod::DoubleSum).unwrap();
        assert!((fast - slow).abs() <= 1e-10 * slow.abs().max(1.0), "{fast} vs {slow}");
    }
}

#[test]
fn variance_asymptotics() {
    let n = 10_000;
    for (kind, p, limit) in [
        (WeightKind::Constant { value: 1.0 }, 0.75, 3.0),
        (WeightKind::Alternating { value: 1.0 }, 0.75, 1.0 / 3.0),
        (WeightKind::Constant { value: 1.0 }, 0.2, 0.25),
    ] {
        let params = ErwvrpParams::new(p, WeightSequence::new(kind).unwrap(), n).unwrap();
        let s2 = params.cumulative_variances(n)[n];
        assert!((s2 / (limit * n as f64) - 1.0).abs() <= 0.01, "p={p}: {s2}");
    }
}

/// `mean (S_n - S_m)^4 / (A_n - A_m)^2` for each pair, over `paths` walks.
fn fourth_moment_ratios(p: f64, pairs: &[(usize, usize)], paths: u64) -> Vec<f64> {
    let n_max = pairs.iter().map(|&(_, n)| n).max().unwrap();
    let params = ErwvrpParams::new(p, WeightSequence::constant(), n_max).unwrap();
    let mut acc = vec![0.0; pairs.len()];
    for s in 0..paths {
        let path = params.simulate(99, s);
        for (i, &(m, n)) in pairs.iter().enumerate() {
            acc[i] += (path.sums[n] - path.sums[m]).powi(4);
        }
    }
    pairs.iter().zip(acc).map(|(&(m, n), a)| a / paths as f64 / ((n - m) as f64).powi(2)).collect()
}

const PAIRS: [(usize, usize); 5] = [(0, 10), (0, 100), (50, 500), (100, 1000), (900, 1000)];

#[test]
fn fourth_moment_is_bounded() {
    for p in [0.4, 0.5, 0.6] {
        for r in fourth_moment_ratios(p, &PAIRS, 10_000) {
            assert!(r <= 10.0, "p={p}: {r}");
        }
    }
}

#[test]
fn fourth_moment_scales_with_strong_memory() {
    // Near-Gaussian sums give ratios close to 3 K(p)^2, which is 27 at p = 0.75.
    let k = k_of_p(0.75).unwrap();
    let ratios = fourth_moment_ratios(0.75, &PAIRS[1..], 10_000);
    for r in &ratios {
        assert!(*r <= 1.25 * 3.0 * k * k, "{ratios:?}");
    }
    let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(l, h), r| (l.min(*r), h.max(*r)));
    assert!(hi / lo < 1.5, "{ratios:?}");
}

#[test]
fn martingale_differences_are_centered() {
    let p = 0.75;
    let alpha = 2.0 * p - 1.0;
    let mut given_plus = Vec::new();
    let mut given_minus = Vec::new();
    for s in 0..100_000u64 {
        let mut w = SignWalker::new(p, 5, s).unwrap();
        let mut x = 0i8;
        for _ in 0..6 {
            x = w.next_sign();
        }
        let d = w.next_sign() as f64 - alpha * x as f64;
        if x > 0 { given_plus.push(d) } else { given_minus.push(d) }
    }
    for d in [given_plus, given_minus] {
        let (mean, se) = mean_se(&d);
        assert!(mean.abs() <= 3.0 * se, "{mean} +/- {se}");
    }
}

#[test]
fn correlations_decay_geometrically() {
    for p in [0.75, 0.3] {
        let alpha: f64 = 2.0 * p - 1.0;
        let n = 100_000u64;
        let mut prods: Vec<Vec<f64>> = (0..11).map(|_| Vec::with_capacity(n as usize)).collect();
        for s in 0..n {
            let mut w = SignWalker::new(p, 8, s).unwrap();
            let first = w.next_sign() as f64;
            for prod in prods.iter_mut().skip(1) {
                prod.push(first * w.next_sign() as f64);
            }
        }
        for (m, prod) in prods.iter().enumerate().skip(1) {
            // X_1 is a fair sign, so the correlation is the mean product.
            let (corr, se) = mean_se(prod);
            assert!(corr.abs() <= alpha.abs().powi(m as i32) + 3.0 * se, "p={p} m={m}: {corr}");
        }
    }
}

#[test]
fn walk_is_reproducible_per_stream() {
    let params = ErwvrpParams::new(0.75, WeightSequence::power(0.5).unwrap(), 1000).unwrap();
    assert_eq!(params.simulate(3, 4), params.simulate(3, 4));
    assert_ne!(params.simulate(3, 4).signs, params.simulate(3, 5).signs);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, rng_seed: RngSeed::Fixed(11), ..ProptestConfig::default() })]

    #[test]
    fn doob_reconstruction_holds_pathwise(p in 0.05f64..0.95, beta in -0.5f64..1.5, seed in any::<u64>()) {
        let params = ErwvrpParams::new(p, WeightSequence::power(beta).unwrap(), 500).unwrap();
        let path = params.simulate(seed, 0);
        let doob = doob_decompose(&params, &path).unwrap();
        let scale = path.sums.iter().fold(1.0f64, |m, s| m.max(s.abs())) / (1.0 - params.alpha());
        prop_assert!(doob.max_abs_residual() <= 1e-9 * scale);
    }

    #[test]
    fn second_moment_is_additive_across_a_split(p in 0.05f64..0.95, m in 0usize..100, k in 1usize..100, n in 1usize..100) {
        // E[(S_n - S_m)^2] = E[(S_k - S_m)^2] + E[(S_n - S_k)^2] + 2 E[(S_k - S_m)(S_n - S_k)]
        let (k, n) = (m + k, m + k + n);
        let params = ErwvrpParams::new(p, WeightSequence::constant(), n).unwrap();
        let alpha = params.alpha();
        let cross: f64 = (m + 1..=k)
            .flat_map(|i| (k + 1..=n).map(move |j| alpha.powi((j - i) as i32)))
            .sum();
        let whole = exact_second_moment(&params, m, n).unwrap();
        let parts = exact_second_moment(&params, m, k).unwrap() + exact_second_moment(&params, k, n).unwrap() + 2.0 * cross;
        prop_assert!((whole - parts).abs() <= 1e-9 * whole.abs().max(1.0));
    }
}
