//! Exact sampling of fractional Brownian motion on the fine grid.
//!
//! The default generator is the circulant embedding of the fractional
//! Gaussian noise covariance (Davies–Harte). A Cholesky factorisation of the
//! same covariance is kept for small grids as an independent cross-check.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FbmPath, HurstIndex, SimGrid};
use crate::rng::{substream, MAX_COMPONENTS};

/// Largest number of increments the Cholesky generator accepts.
pub const CHOLESKY_MAX_STEPS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    CirculantEmbedding,
    Cholesky,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub method: Method,
    pub base_seed: u64,
    /// Replication id.
    pub stream_index: u64,
    /// Switch to Cholesky if the circulant spectrum turns out negative.
    pub cholesky_fallback: bool,
}

impl GeneratorSpec {
    pub fn new(base_seed: u64, stream_index: u64) -> Self {
        GeneratorSpec {
            method: Method::CirculantEmbedding,
            base_seed,
            stream_index,
            cholesky_fallback: false,
        }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }
}

/// Autocovariance of fractional Gaussian noise with increment length `step`.
pub fn fgn_autocov(h: HurstIndex, step: f64, lag: u64) -> f64 {
    step.powf(h.two_h()) * unit_autocov(h.two_h(), lag)
}

/// Unit-step fGn autocovariance. Large lags use the binomial expansion of
/// `((1+1/x)^{2H} + (1-1/x)^{2H} - 2) / 2` to avoid cancellation.
pub(crate) fn unit_autocov(two_h: f64, lag: u64) -> f64 {
    let x = lag as f64;
    if lag < 64 {
        return 0.5 * ((x + 1.0).powf(two_h) + (x - 1.0).abs().powf(two_h) - 2.0 * x.powf(two_h));
    }
    let inv2 = 1.0 / (x * x);
    let mut coeff = 1.0;
    let mut pow = 1.0;
    let mut sum = 0.0;
    for k in 1..40 {
        let j = 2 * k;
        coeff *= (two_h - (j - 2) as f64) * (two_h - (j - 1) as f64) / ((j - 1) as f64 * j as f64);
        pow *= inv2;
        let term = coeff * pow;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    x.powf(two_h) * sum
}

struct CirculantFactor {
    /// `sqrt(lambda_k / L)`
    scale: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

type FactorCache<T> = OnceLock<RwLock<HashMap<(u64, usize), Arc<T>>>>;

static CIRCULANT_CACHE: FactorCache<CirculantFactor> = OnceLock::new();
static CHOLESKY_CACHE: FactorCache<DMatrix<f64>> = OnceLock::new();

fn cached<T>(
    cache: &'static FactorCache<T>,
    key: (u64, usize),
    build: impl FnOnce() -> Result<T>,
) -> Result<Arc<T>> {
    let lock = cache.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(v) = lock.read().expect("factor cache poisoned").get(&key) {
        return Ok(Arc::clone(v));
    }
    let built = Arc::new(build()?);
    let mut guard = lock.write().expect("factor cache poisoned");
    Ok(Arc::clone(guard.entry(key).or_insert(built)))
}

/// Eigenvalues of the circulant embedding for `steps` increments (unit step).
pub fn circulant_spectrum(h: HurstIndex, steps: usize) -> Vec<f64> {
    let len = (2 * steps.saturating_sub(1)).max(2).next_power_of_two();
    let mut row: Vec<Complex<f64>> = (0..len)
        .map(|j| Complex::new(unit_autocov(h.two_h(), j.min(len - j) as u64), 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut row);
    row.into_iter().map(|c| c.re).collect()
}

fn circulant_factor(h: HurstIndex, steps: usize) -> Result<Arc<CirculantFactor>> {
    cached(&CIRCULANT_CACHE, (h.value().to_bits(), steps), || {
        let eig = circulant_spectrum(h, steps);
        let len = eig.len();
        let max = eig.iter().cloned().fold(f64::MIN, f64::max);
        let min = eig.iter().cloned().fold(f64::MAX, f64::min);
        if min < -1e-9 * max {
            return Err(Error::NonPositiveSpectrum { min, max });
        }
        let scale = eig.iter().map(|&l| (l.max(0.0) / len as f64).sqrt()).collect();
        let fft = FftPlanner::new().plan_fft_forward(len);
        Ok(CirculantFactor { scale, fft })
    })
}

fn cholesky_factor(h: HurstIndex, steps: usize) -> Result<Arc<DMatrix<f64>>> {
    if steps > CHOLESKY_MAX_STEPS {
        return Err(Error::InvalidGrid(format!(
            "Cholesky generator supports at most {CHOLESKY_MAX_STEPS} steps, got {steps}"
        )));
    }
    cached(&CHOLESKY_CACHE, (h.value().to_bits(), steps), || {
        let acf: Vec<f64> = (0..steps).map(|k| unit_autocov(h.two_h(), k as u64)).collect();
        let cov = DMatrix::from_fn(steps, steps, |i, j| acf[i.abs_diff(j)]);
        cov.cholesky()
            .map(|c| c.unpack())
            .ok_or_else(|| Error::InvalidInput("fGn covariance is not positive definite".into()))
    })
}

fn circulant_increments(
    factor: &CirculantFactor,
    steps: usize,
    rng: &mut impl Rng,
    out: &mut [f64],
    scale: f64,
) {
    let mut buf: Vec<Complex<f64>> = factor
        .scale
        .iter()
        .map(|&s| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex::new(s * re, s * im)
        })
        .collect();
    factor.fft.process(&mut buf);
    for (o, c) in out.iter_mut().zip(&buf[..steps]) {
        *o = c.re * scale;
    }
}

fn cholesky_increments(lower: &DMatrix<f64>, rng: &mut impl Rng, out: &mut [f64], scale: f64) {
    let steps = lower.nrows();
    let z = DVector::from_fn(steps, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = lower * z;
    for (o, v) in out.iter_mut().zip(x.iter()) {
        *o = v * scale;
    }
}

/// Samples `grid.d_dims` independent fBm components on the fine grid.
pub fn generate(h: HurstIndex, grid: SimGrid, spec: GeneratorSpec) -> Result<FbmPath> {
    let steps = grid.fine_steps();
    let d = grid.d_dims;
    if d as u64 > MAX_COMPONENTS {
        return Err(Error::InvalidGrid(format!("at most {MAX_COMPONENTS} components supported")));
    }
    let scale = grid.fine_step().powf(h.value());

    let method = match spec.method {
        Method::CirculantEmbedding => match circulant_factor(h, steps) {
            Ok(f) => Some(f),
            Err(e @ Error::NonPositiveSpectrum { .. }) if !spec.cholesky_fallback => return Err(e),
            Err(Error::NonPositiveSpectrum { .. }) => None,
            Err(e) => return Err(e),
        },
        Method::Cholesky => None,
    };
    let lower = match method {
        Some(_) => None,
        None => Some(cholesky_factor(h, steps)?),
    };

    let mut values = Array2::<f64>::zeros((d, steps + 1));
    let mut incr = vec![0.0; steps];
    for c in 0..d {
        let mut rng = substream(spec.base_seed, spec.stream_index, c as u64);
        match (&method, &lower) {
            (Some(f), _) => circulant_increments(f, steps, &mut rng, &mut incr, scale),
            (None, Some(l)) => cholesky_increments(l, &mut rng, &mut incr, scale),
            (None, None) => unreachable!(),
        }
        let mut row = values.row_mut(c);
        let mut acc = 0.0;
        for (i, dx) in incr.iter().enumerate() {
            acc += dx;
            row[i + 1] = acc;
        }
    }
    Ok(FbmPath { values, seed: spec.base_seed, stream: spec.stream_index, grid, hurst: h })
}

/// Values at the coarse nodes `0, m, 2m, ...` (exact copies).
pub fn subsample_coarse(path: &FbmPath) -> Array2<f64> {
    let m = path.grid.refine_m;
    let n = path.grid.n_coarse;
    Array2::from_shape_fn((path.d_dims(), n + 1), |(j, k)| path.values[[j, k * m]])
}

/// Writes `t,comp_0,...,comp_{d-1}` rows for every fine node.
pub fn write_csv(path: &FbmPath, mut w: impl Write) -> std::io::Result<()> {
    write_csv_rows(&path.grid, path.values.view(), &mut w)
}

fn write_csv_rows(grid: &SimGrid, values: ArrayView2<'_, f64>, w: &mut impl Write) -> std::io::Result<()> {
    let d = values.nrows();
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((0..d).map(|c| format!("comp_{c}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for i in 0..values.ncols() {
        write!(w, "{}", grid.fine_time(i))?;
        for c in 0..d {
            write!(w, ",{}", values[[c, i]])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::cov_r;

    fn h(x: f64) -> HurstIndex {
        HurstIndex::new(x).unwrap()
    }

    #[test]
    fn autocov_examples() {
        assert_eq!(fgn_autocov(h(0.5), 1.0, 0), 1.0);
        assert_eq!(fgn_autocov(h(0.5), 1.0, 3), 0.0);
        let expect = cov_r(h(0.75), 0.0, 1.0, 1.0, 2.0).unwrap();
        assert!((fgn_autocov(h(0.75), 1.0, 1) - expect).abs() < 1e-15);
        assert!((expect - 0.414214).abs() < 1e-6);
    }

    #[test]
    fn autocov_series_matches_direct_formula() {
        for hv in [0.55, 0.7, 0.75, 0.9] {
            let two_h = 2.0 * hv;
            for lag in [64u64, 65, 100, 1000] {
                let x = lag as f64;
                let direct = 0.5 * ((x + 1.0).powf(two_h) + (x - 1.0).powf(two_h) - 2.0 * x.powf(two_h));
                let series = unit_autocov(two_h, lag);
                assert!((series - direct).abs() < 1e-9 * direct.abs().max(1e-6), "H={hv} lag={lag}");
            }
            let at_63 = unit_autocov(two_h, 63);
            let at_64 = unit_autocov(two_h, 64);
            assert!(at_64 < at_63 && at_64 > 0.9 * at_63);
        }
    }

    #[test]
    fn autocov_scales_with_step() {
        let a = fgn_autocov(h(0.8), 0.25, 2);
        let b = fgn_autocov(h(0.8), 1.0, 2);
        assert!((a - 0.25f64.powf(1.6) * b).abs() < 1e-15);
    }

    #[test]
    fn spectrum_nonnegative() {
        for hv in [0.5, 0.55, 0.6, 0.75, 0.9, 0.99] {
            for steps in [2, 3, 17, 1024, 4097] {
                let eig = circulant_spectrum(h(hv), steps);
                let max = eig.iter().cloned().fold(f64::MIN, f64::max);
                assert!(eig.iter().all(|&l| l >= -1e-9 * max), "H={hv} N={steps}");
            }
        }
    }

    #[test]
    fn generate_is_deterministic() {
        let grid = SimGrid::new(1.0, 16, 4, 2).unwrap();
        let a = generate(h(0.7), grid, GeneratorSpec::new(42, 0)).unwrap();
        let b = generate(h(0.7), grid, GeneratorSpec::new(42, 0)).unwrap();
        let c = generate(h(0.7), grid, GeneratorSpec::new(42, 1)).unwrap();
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, c.values);
        assert_ne!(a.values.row(0), a.values.row(1));
        assert!(a.values.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cholesky_is_deterministic_and_bounded() {
        let grid = SimGrid::new(1.0, 8, 2, 1).unwrap();
        let spec = GeneratorSpec::new(3, 5).with_method(Method::Cholesky);
        let a = generate(h(0.6), grid, spec).unwrap();
        let b = generate(h(0.6), grid, spec).unwrap();
        assert_eq!(a.values, b.values);
        let big = SimGrid::new(1.0, 4097, 2, 1).unwrap();
        assert!(generate(h(0.6), big, spec).is_err());
    }

    #[test]
    fn subsample_examples() {
        let grid = SimGrid::new(1.0, 4, 1, 1).unwrap();
        let p = generate(h(0.6), grid, GeneratorSpec::new(1, 0)).unwrap();
        assert_eq!(subsample_coarse(&p), p.values);

        let grid = SimGrid::new(1.0, 4, 8, 2).unwrap();
        let mut p = generate(h(0.6), grid, GeneratorSpec::new(1, 0)).unwrap();
        let coarse = subsample_coarse(&p);
        for j in 0..2 {
            for k in 0..=4 {
                assert_eq!(coarse[[j, k]], p.values[[j, 8 * k]]);
            }
        }
        p.values.fill(0.0);
        assert!(subsample_coarse(&p).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn csv_layout() {
        let grid = SimGrid::new(1.0, 4, 2, 1).unwrap();
        let p = generate(h(0.6), grid, GeneratorSpec::new(1, 0)).unwrap();
        let mut buf = Vec::new();
        write_csv(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,comp_0");
        assert_eq!(lines.len(), 1 + 9);
        assert_eq!(lines[1], "0,0");
    }
}
