use proptest::prelude::*;
use proptest::test_runner::RngSeed;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use takagi_lab::fractal::{memory_parameter, psi, sign_walk};
use takagi_lab::{FractalFunction, StreamRng, TorusPoint, WeightKind, WeightSequence};

const EPS: f64 = 1e-12;

fn dyadic(u: u64) -> TorusPoint {
    TorusPoint::from_ratio(u as u128, 1u128 << 53).unwrap()
}

fn uniform(rng: &mut StreamRng) -> TorusPoint {
    dyadic(rng.dyadic53())
}

fn generators() -> Vec<WeightSequence> {
    [
        WeightKind::Constant { value: 1.0 },
        WeightKind::Power { beta: 0.5 },
        WeightKind::Alternating { value: 1.0 },
        WeightKind::OddIndicator,
        WeightKind::Explicit { values: vec![2.0, -1.0, 0.0, 3.0, 0.5] },
    ]
    .into_iter()
    .map(|k| WeightSequence::new(k).unwrap())
    .collect()
}

/// A step `h` in `(0, 1/16)` spread over many scales.
fn step(rng: &mut StreamRng) -> TorusPoint {
    let scale = 4 + (rng.uniform() * 40.0) as u32;
    let u = (rng.dyadic53() >> scale).max(1);
    dyadic(u)
}

#[test]
fn midrange_and_tail_bounds() {
    for r in [2u32, 3, 10] {
        for (g, seq) in generators().into_iter().enumerate() {
            let f = FractalFunction::new(r, seq.clone()).unwrap();
            let mut rng = StreamRng::new(100 + r as u64, g as u64);
            for _ in 0..200 {
                let x = uniform(&mut rng);
                let h = step(&mut rng);
                let d = f.decompose_increment(&x, &h, EPS).unwrap();
                let hf = h.to_f64();
                let depth = d.linear_depth.max(0) as usize;
                let mid: f64 = (depth + 1..=d.m).map(|k| seq.weight(k).abs()).sum();
                let mid_bound = 2.0 * hf * mid;
                assert!(d.midrange.abs() <= mid_bound * (1.0 + 1e-12) + 4.0 * EPS, "r={r} g={g}: {d:?}");
                let tail: f64 =
                    (d.m + 1..d.m + 200).map(|k| seq.weight(k).abs() / (r as f64).powi(k as i32 - 1)).sum();
                assert!(d.tail.abs() <= 2.0 * tail + 4.0 * EPS, "r={r} g={g}: {d:?}");
                assert!(d.residual.abs() <= 4.0 * EPS, "r={r} g={g}: {d:?}");
            }
        }
    }
}

#[test]
fn even_signs_are_uniform_on_the_cube() {
    const N: usize = 100_000;
    const L: usize = 10;
    let mut counts = vec![0u32; 1 << L];
    let mut rng = StreamRng::new(31, 0);
    for _ in 0..N {
        let signs = sign_walk(2, &uniform(&mut rng), L);
        let cell = signs.iter().fold(0usize, |c, s| (c << 1) | (*s > 0) as usize);
        counts[cell] += 1;
    }
    let expected = N as f64 / (1 << L) as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new(((1 << L) - 1) as f64).unwrap().inverse_cdf(0.99);
    assert!(chi2 < critical, "chi2 {chi2} >= {critical}");
}

#[test]
fn odd_signs_persist_with_memory_parameter() {
    const N: usize = 100_000;
    for r in [3u32, 5] {
        let mut rng = StreamRng::new(37, r as u64);
        let same = (0..N)
            .filter(|_| {
                let s = sign_walk(r, &uniform(&mut rng), 2);
                s[0] == s[1]
            })
            .count() as f64
            / N as f64;
        let p = memory_parameter(r);
        let se = (p * (1.0 - p) / N as f64).sqrt();
        assert!((same - p).abs() <= 3.0 * se, "r={r}: {same} vs {p}");
    }
}

#[test]
fn even_base_increment_is_linear_on_the_grid() {
    // h = 2^{-m} leaves no tail, so the increment over h is w_m(x) plus carries.
    let f = FractalFunction::new(2, WeightSequence::constant()).unwrap();
    let x = TorusPoint::from_ratio(5, 16).unwrap();
    let h = TorusPoint::inverse_power(2, 6).unwrap();
    let d = f.decompose_increment(&x, &h, EPS).unwrap();
    assert_eq!(d.tail, 0.0);
    assert!((d.linear / h.to_f64() - f.weighted_walk(&x, 6)).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 512, rng_seed: RngSeed::Fixed(7), ..ProptestConfig::default() })]

    #[test]
    fn sawtooth_is_one_lipschitz(u in 0u64..(1 << 53), v in 1u64..(1 << 52), r in 2u32..12, k in 1usize..30) {
        let x = dyadic(u);
        let h = dyadic(v);
        let (y, _) = x.add_mod1(&h);
        let diff = (psi(r, k, &y) - psi(r, k, &x)).abs();
        let ulps = 4.0 * f64::EPSILON * (r as f64).powi(1 - k as i32);
        prop_assert!(diff <= h.to_f64() + ulps);
    }

    #[test]
    fn evaluation_meets_its_certificate(u in 0u64..(1 << 53), r in 2u32..8, beta in -0.5f64..1.0) {
        let f = FractalFunction::new(r, WeightSequence::power(beta).unwrap()).unwrap();
        let x = dyadic(u);
        let coarse = f.eval(&x, 1e-6).unwrap();
        let fine = f.eval(&x, 1e-13).unwrap();
        prop_assert!(coarse.certified_error <= 1e-6 && fine.certified_error <= 1e-13);
        prop_assert!((coarse.value - fine.value).abs() <= 1e-6 + 1e-13 + 1e-12);
    }

    #[test]
    fn decomposition_identity(u in 0u64..(1 << 53), v in 1u64..(1 << 49), r in 2u32..11) {
        let f = FractalFunction::new(r, WeightSequence::power(0.25).unwrap()).unwrap();
        let d = f.decompose_increment(&dyadic(u), &dyadic(v), EPS).unwrap();
        prop_assert!(d.residual.abs() <= 4.0 * EPS);
    }
}
