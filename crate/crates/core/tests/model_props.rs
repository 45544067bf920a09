use fbm_riemann::model::joint_increment_lower_constant;
use fbm_riemann::{cov_r, kappa, nu, HurstIndex, Regime};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SLACK: f64 = 1e-12;

fn h(x: f64) -> HurstIndex {
    HurstIndex::new(x).unwrap()
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

proptest! {
    #[test]
    fn cov_r_is_symmetric(hv in 0.5f64..0.999, a in 0.0f64..3.0, b in 0.0f64..3.0, c in 0.0f64..3.0, d in 0.0f64..3.0) {
        let (s, t) = ordered(a, b);
        let (x, y) = ordered(c, d);
        prop_assert_eq!(cov_r(h(hv), s, t, x, y).unwrap(), cov_r(h(hv), x, y, s, t).unwrap());
    }

    #[test]
    fn cov_r_vanishes_on_degenerate_intervals(hv in 0.5f64..0.999, s in 0.0f64..2.0, x in 0.0f64..2.0, y in 0.0f64..2.0) {
        let (x, y) = ordered(x, y);
        prop_assert_eq!(cov_r(h(hv), s, s, x, y).unwrap(), 0.0);
    }

    #[test]
    fn cov_r_matches_variance_on_diagonal(hv in 0.5f64..0.999, a in 0.0f64..2.0, b in 0.0f64..2.0) {
        let (s, t) = ordered(a, b);
        let v = cov_r(h(hv), s, t, s, t).unwrap();
        prop_assert!((v - (t - s).powf(2.0 * hv)).abs() <= 1e-12 * (1.0 + v));
    }

    #[test]
    fn kappa_increases(hv in prop_oneof![0.5f64..0.7499, 0.7501f64..0.999, Just(0.75)], u in 1e-6f64..1.0, w in 1e-6f64..1.0) {
        let h = h(hv);
        let (u, w) = ordered(u, w);
        let top = if h.regime() == Regime::Critical { (-1.0f64).exp() } else { 1.0 };
        prop_assume!(w <= top && u < w);
        prop_assert!(kappa(h, u).unwrap() <= kappa(h, w).unwrap());
    }
}

/// `n_quads` sorted quadruples in `[0, 1]`, `s <= t`, `x <= y`.
fn quadruples(seed: u64, n_quads: usize) -> Vec<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_quads)
        .map(|_| {
            let (s, t) = ordered(rng.random(), rng.random());
            let (x, y) = ordered(rng.random(), rng.random());
            [s, t, x, y]
        })
        .collect()
}

#[test]
fn cov_r_bounds_on_random_quadruples() {
    for hv in [0.55, 0.6, 0.7, 0.75, 0.8, 0.9, 0.97] {
        let h = h(hv);
        let k = joint_increment_lower_constant(h, 1.0).unwrap();
        for [s, t, x, y] in quadruples(hv.to_bits(), 100_000) {
            let r = cov_r(h, s, t, x, y).unwrap();
            let upper = ((t - s) * (y - x)).powf(hv);
            assert!(r <= upper + SLACK, "upper: H={hv} {:?} r={r}", [s, t, x, y]);
            assert!((t - s) * (y - x) <= k * r + SLACK, "lower: H={hv} {:?} r={r}", [s, t, x, y]);
        }
    }
}

#[test]
fn lower_constant_is_sharp_for_adjacent_short_intervals() {
    // Two tiny intervals at distance T: the ratio approaches K_T.
    let hv = 0.7;
    let k = joint_increment_lower_constant(h(hv), 1.0).unwrap();
    let e = 1e-4;
    let r = cov_r(h(hv), 0.0, e, 1.0 - e, 1.0).unwrap();
    let ratio = e * e / r;
    assert!((ratio / k - 1.0).abs() < 1e-3, "{ratio} vs {k}");
    assert!(joint_increment_lower_constant(HurstIndex::BROWNIAN, 1.0).is_err());
}

#[test]
fn nu_inverts_kappa_below_three_quarters() {
    for hv in [0.5, 0.6, 0.7, 0.74] {
        for n in 2..=10_000u64 {
            let a = nu(h(hv), n).unwrap();
            let b = 1.0 / kappa(h(hv), 1.0 / n as f64).unwrap();
            assert!((a - b).abs() <= 1e-12 * a, "H={hv} n={n}: {a} vs {b}");
        }
    }
}

#[test]
fn nu_in_other_regimes() {
    for n in [2u64, 10, 4096] {
        let x = n as f64;
        assert!((nu(h(0.75), n).unwrap() - (x / x.ln()).sqrt()).abs() < 1e-12 * x);
        assert!((nu(h(0.9), n).unwrap() - x.powf(0.2)).abs() < 1e-12 * x);
        // At the critical point 1/kappa(1/n) = sqrt(n / ln n) as well.
        assert!((nu(h(0.75), n).unwrap() * kappa(h(0.75), 1.0 / x).unwrap() - 1.0).abs() < 1e-12);
    }
    assert!(nu(h(0.75), 1).is_err());
    assert!(kappa(h(0.6), 0.0).is_err());
    assert!(kappa(h(0.6), 1.5).is_err());
}

#[test]
fn cov_r_rejects_unordered_arguments() {
    assert!(cov_r(h(0.6), 0.5, 0.2, 0.0, 1.0).is_err());
    assert!(cov_r(h(0.6), 0.0, 1.0, 0.9, 0.1).is_err());
    assert!(cov_r(h(0.6), -0.1, 1.0, 0.0, 1.0).is_err());
}
