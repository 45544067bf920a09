//! Monte Carlo checks of the path generator against the exact covariance.

use fbm_riemann::fbm::{circulant_spectrum, generate, GeneratorSpec, Method};
use fbm_riemann::{cov_r, HurstIndex, SimGrid};

const R: u64 = 5000;
const BAND: f64 = 5.0;

fn h(x: f64) -> HurstIndex {
    HurstIndex::new(x).unwrap()
}

/// Mean and standard error of a sample.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Per-pair product samples `B_{t_a} B_{t_b}` over `R` paths of an 8-step grid.
fn product_samples(hv: f64, method: Method, seed: u64) -> (SimGrid, Vec<Vec<f64>>) {
    let grid = SimGrid::new(1.0, 8, 1, 2).unwrap();
    let mut prods = vec![Vec::with_capacity(R as usize); 8 * 8 + 8 * 8];
    for r in 0..R {
        let p = generate(h(hv), grid, GeneratorSpec::new(seed, r).with_method(method)).unwrap();
        for a in 1..=8 {
            for b in 1..=8 {
                prods[(a - 1) * 8 + (b - 1)].push(p.values[[0, a]] * p.values[[0, b]]);
                prods[64 + (a - 1) * 8 + (b - 1)].push(p.values[[0, a]] * p.values[[1, b]]);
            }
        }
    }
    (grid, prods)
}

#[test]
fn covariance_matches_exact_on_eight_points() {
    for hv in [0.5, 0.6, 0.75, 0.9] {
        let (grid, prods) = product_samples(hv, Method::CirculantEmbedding, 11);
        for a in 1..=8 {
            for b in 1..=8 {
                let (ta, tb) = (grid.fine_time(a), grid.fine_time(b));
                let exact = cov_r(h(hv), 0.0, ta, 0.0, tb).unwrap();
                let (m, se) = mean_se(&prods[(a - 1) * 8 + (b - 1)]);
                assert!((m - exact).abs() <= BAND * se, "H={hv} ({a},{b}): {m} vs {exact} (se {se})");
                let (c, se) = mean_se(&prods[64 + (a - 1) * 8 + (b - 1)]);
                assert!(c.abs() <= BAND * se, "H={hv} cross ({a},{b}): {c} (se {se})");
            }
        }
    }
}

#[test]
fn cholesky_and_circulant_agree_in_covariance() {
    // Paths differ; only the covariance estimates are compared.
    let (_, circ) = product_samples(0.7, Method::CirculantEmbedding, 3);
    let (_, chol) = product_samples(0.7, Method::Cholesky, 4);
    for (x, y) in circ.iter().zip(&chol).take(64) {
        let (mx, sx) = mean_se(x);
        let (my, sy) = mean_se(y);
        assert!((mx - my).abs() <= BAND * (sx * sx + sy * sy).sqrt(), "{mx} vs {my}");
    }
}

#[test]
fn self_similar_in_variance() {
    for hv in [0.55, 0.8] {
        let n = 64;
        let grid = SimGrid::new(1.0, n, 1, 1).unwrap();
        let mut small = Vec::new();
        let mut whole = Vec::new();
        for r in 0..R {
            let p = generate(h(hv), grid, GeneratorSpec::new(21, r)).unwrap();
            small.push(((n as f64).powf(hv) * p.values[[0, 1]]).powi(2));
            whole.push(p.values[[0, n]].powi(2));
        }
        for xs in [&small, &whole] {
            let (m, se) = mean_se(xs);
            assert!((m - 1.0).abs() <= BAND * se, "H={hv}: {m} (se {se})");
        }
    }
}

#[test]
fn spectrum_nonnegative_over_grid_sizes() {
    for hv in [0.5, 0.6, 0.75, 0.9, 0.99] {
        for steps in [2, 3, 17, 256, 1000, 1 << 14] {
            let s = circulant_spectrum(h(hv), steps);
            let floor = -1e-10 * s.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            assert!(s.iter().all(|&x| x >= floor), "H={hv}, N={steps}");
        }
    }
}

#[test]
fn refinement_keeps_horizon_variance() {
    // Var B_T = T^{2H} whatever the fine step.
    let hv = 0.65;
    let grid = SimGrid::new(2.0, 16, 8, 1).unwrap();
    let xs: Vec<f64> = (0..R)
        .map(|r| generate(h(hv), grid, GeneratorSpec::new(5, r)).unwrap().values[[0, 128]].powi(2))
        .collect();
    let (m, se) = mean_se(&xs);
    let exact = 2f64.powf(2.0 * hv);
    assert!((m - exact).abs() <= BAND * se, "{m} vs {exact}");
}
