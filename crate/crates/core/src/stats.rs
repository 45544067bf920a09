//! Replication engine and estimators.
//!
//! An [`Experiment`] fixes every input of a Monte Carlo run. Replication `r`
//! draws its path from substream `r` of `base_seed`, so the per-replication
//! results do not depend on scheduling; the aggregation is a sequential fold
//! in replication order. A report is therefore a pure function of the
//! experiment, whatever the worker count.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array1;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::constants::{constants, diag_variance_factor, off_diag_variance_factor};
use crate::error::{Error, Result};
use crate::fbm::{generate, GeneratorSpec};
use crate::integrands::{build, IntegrandSpec};
use crate::integrators::{
    error_process, fine_integral, weight_integral, weighted_drift_sum, weighted_rosenblatt, ErrorRecord,
    ReferenceScheme,
};
use crate::model::{cov_r, nu, FbmPath, HurstIndex, ProcessPair, Regime, SimGrid};
use crate::moments::rosenblatt_approx_variance;
use crate::rng::aux_stream;

/// Report format version.
pub const SCHEMA_VERSION: u32 = 1;
/// Half-width of the accepted band around the predicted log-log slope.
pub const SLOPE_TOL: f64 = 0.15;
/// Standard errors allowed between an estimated mean and its target.
pub const MEAN_SE_BAND: f64 = 5.0;
/// Minimum KS p-value for the normality criterion.
pub const KS_ALPHA: f64 = 0.01;
/// Minimum sample size for the KS test.
pub const KS_MIN_SAMPLES: usize = 500;
/// Bootstrap resamples for variance intervals.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
/// Bound on relative L2 gaps and drift MSEs.
pub const L2_GAP_BOUND: f64 = 0.2;
pub const DRIFT_MSE_BOUND: f64 = 0.01;
/// Final first-order MSE relative to `Var(½∫P ds)`.
pub const FIRST_ORDER_REL_MSE: f64 = 0.02;
/// Values at or below this floor count as zero in monotonicity checks.
pub const ZERO_FLOOR: f64 = 1e-20;
/// Time points per axis of the generator covariance check.
pub const QC_TIMES: usize = 8;

const BOOTSTRAP_TAG: u64 = 0xB007;

/// Which limit statement an experiment exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    FirstOrder,
    Clt,
    Rosenblatt,
    RateSlope,
    Drift,
    GeneratorQc,
}

impl Theorem {
    pub const ALL: [Theorem; 6] = [
        Theorem::FirstOrder,
        Theorem::Clt,
        Theorem::Rosenblatt,
        Theorem::RateSlope,
        Theorem::Drift,
        Theorem::GeneratorQc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Theorem::FirstOrder => "first_order",
            Theorem::Clt => "clt",
            Theorem::Rosenblatt => "rosenblatt",
            Theorem::RateSlope => "rate_slope",
            Theorem::Drift => "drift",
            Theorem::GeneratorQc => "generator_qc",
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Theorem::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown theorem `{s}`")))
    }
}

mod spec_string {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::integrands::IntegrandSpec;

    pub fn serialize<S: Serializer>(spec: &IntegrandSpec, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(spec)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<IntegrandSpec, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Every input of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub h: HurstIndex,
    #[serde(with = "spec_string")]
    pub integrand: IntegrandSpec,
    pub n_list: Vec<usize>,
    pub t_list: Vec<f64>,
    pub replications: usize,
    /// Fine steps per coarse step of the largest `n`.
    pub refine_m: usize,
    pub base_seed: u64,
    pub theorem: Theorem,
    pub horizon: f64,
    /// Relative tolerance of variance criteria.
    pub variance_tol: f64,
}

impl Experiment {
    pub fn new(h: HurstIndex, integrand: IntegrandSpec, theorem: Theorem) -> Self {
        Experiment {
            h,
            integrand,
            n_list: vec![256],
            t_list: vec![1.0],
            replications: 1000,
            refine_m: 64,
            base_seed: 0,
            theorem,
            horizon: 1.0,
            variance_tol: 0.1,
        }
    }

    pub fn n_max(&self) -> usize {
        self.n_list.last().copied().unwrap_or(0)
    }

    /// Shared fine grid: `n_max * refine_m` steps.
    pub fn grid(&self) -> Result<SimGrid> {
        SimGrid::new(self.horizon, self.n_max(), self.refine_m, self.integrand.dims().1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_list.is_empty() {
            return bad("n_list must not be empty".into());
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("n_list must be strictly increasing, got {:?}", self.n_list));
        }
        if self.n_list[0] < 2 {
            return bad("every n must be >= 2".into());
        }
        let fine = self.n_max() * self.refine_m;
        if let Some(n) = self.n_list.iter().find(|&&n| fine % n != 0) {
            return bad(format!("n={n} does not divide the fine grid of {fine} steps"));
        }
        if self.replications < 2 {
            return bad("at least 2 replications are needed".into());
        }
        if !(self.variance_tol > 0.0) {
            return bad("variance_tol must be positive".into());
        }
        self.grid()?;
        if self.theorem != Theorem::GeneratorQc {
            if self.t_list.is_empty() {
                return bad("t_list must not be empty".into());
            }
            for &t in &self.t_list {
                for &n in &self.n_list {
                    let x = t / self.horizon * n as f64;
                    if !(t > 0.0 && t <= self.horizon) || (x - x.round()).abs() > 1e-9 * n as f64 {
                        return bad(format!("t={t} is not a coarse node for n={n}"));
                    }
                }
            }
        }
        let regime = self.h.regime();
        match self.theorem {
            Theorem::RateSlope => {
                if self.n_list.len() < 3 || !self.n_list.iter().all(|n| n.is_power_of_two()) {
                    return bad("rate_slope needs at least 3 dyadic n values".into());
                }
            }
            Theorem::Clt if regime == Regime::High => {
                return Err(Error::Regime(format!(
                    "clt needs H <= 3/4, got H={}; use the rosenblatt theorem",
                    self.h
                )));
            }
            Theorem::Rosenblatt if regime != Regime::High => {
                return Err(Error::Regime(format!("rosenblatt needs H > 3/4, got H={}", self.h)));
            }
            Theorem::GeneratorQc if self.integrand.dims().1 < 1 => {
                return bad("generator_qc needs at least one component".into());
            }
            _ => {}
        }
        Ok(())
    }
}

/// Statistic recorded per replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// `M^n_t - ½∫P` (`M^n_t` at `H = 1/2`).
    Centered,
    /// `ν_H(n)` times [`Quantity::Centered`].
    Normalized,
    /// `½∫_0^t P^{(i,j)} ds`.
    HalfWeightIntegral,
    /// `∫_0^t (P^{(i,j)})^2 ds`.
    WeightSquareIntegral,
    /// Weighted Rosenblatt approximation `Z_n`.
    RosenblattApprox,
    /// `ν_H(n) (M^n_t - ½∫P) - Z_n`.
    RosenblattGap,
    /// `ν_H(n) n^{2H-1} Σ b ∫(s - s_n) dB^i` minus its limit.
    DriftError,
    /// `B^i_t B^j_s` on the fine grid.
    PathProduct,
}

/// Location of a statistic. `s` is a second time (path products only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Key {
    pub quantity: Quantity,
    pub n: usize,
    pub t: f64,
    pub s: f64,
    pub i: usize,
    pub j: usize,
}

impl Key {
    fn new(quantity: Quantity, n: usize, t: f64, i: usize, j: usize) -> Self {
        Key { quantity, n, t, s: t, i, j }
    }
}

/// Results of one replication, in a layout shared by all replications.
#[derive(Debug, Clone)]
pub struct Replication {
    pub index: u64,
    pub records: Vec<ErrorRecord>,
    pub keys: Vec<Key>,
    pub values: Vec<f64>,
}

/// Sample moments of one statistic across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    #[serde(flatten)]
    pub key: Key,
    pub target: f64,
    pub mean: f64,
    pub se: f64,
    pub variance: f64,
    pub variance_se: f64,
    /// `E[(X - target)^2]`
    pub mse: f64,
    pub mse_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    pub t: f64,
    pub i: usize,
    pub j: usize,
    pub slope: f64,
    pub stderr: f64,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub n: usize,
    pub t: f64,
    pub i: usize,
    pub j: usize,
    pub statistic: f64,
    pub p_value: f64,
    /// Parameters were estimated from the sample.
    pub approximate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceCheck {
    pub estimate: f64,
    pub target: f64,
    pub rel_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub rel_tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Criterion {
    fn at_most(name: String, value: f64, threshold: f64) -> Self {
        Criterion { name, value, threshold, pass: value <= threshold }
    }

    fn above(name: String, value: f64, threshold: f64) -> Self {
        Criterion { name, value, threshold, pass: value > threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub schema: u32,
    pub experiment: Experiment,
    pub estimates: Vec<Estimate>,
    pub slopes: Vec<SlopeEstimate>,
    pub ks: Vec<KsResult>,
    pub variance_checks: Vec<VarianceCheck>,
    pub criteria: Vec<Criterion>,
    pub pass: bool,
    pub caveats: Vec<String>,
    /// Seconds; kept out of the JSON so reports are reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

impl McReport {
    pub fn estimate(&self, quantity: Quantity, n: usize, t: f64, i: usize, j: usize) -> Option<&Estimate> {
        self.estimates.iter().find(|e| {
            let k = &e.key;
            k.quantity == quantity && k.n == n && k.t == t && k.i == i && k.j == j
        })
    }
}

/// Centred error statistic: `corrected`, or `m_n` in the Brownian case where
/// the Itô reference has no `½∫P` drift.
pub fn centered_error(rec: &ErrorRecord, i: usize, j: usize) -> f64 {
    if rec.h.is_brownian() {
        rec.m_n[[i, j]]
    } else {
        rec.corrected[[i, j]]
    }
}

fn weight_square_integral(pair: &ProcessPair, path: &FbmPath, i: usize, j: usize, t: f64) -> Result<f64> {
    let end = path.grid.fine_index(t)?;
    let dt = path.grid.fine_step();
    let p = pair.p.slice(ndarray::s![i, j, ..]);
    Ok((0..end).map(|l| 0.5 * (p[l] * p[l] + p[l + 1] * p[l + 1])).sum::<f64>() * dt)
}

/// Runs replication `index` of `e`.
pub fn replicate(e: &Experiment, index: u64) -> Result<Replication> {
    let grid = e.grid()?;
    let path = generate(e.h, grid, GeneratorSpec::new(e.base_seed, index))?;
    let mut keys = Vec::new();
    let mut values = Vec::new();
    let mut records = Vec::new();
    let mut push = |k: Key, v: f64| {
        keys.push(k);
        values.push(v);
    };

    if e.theorem == Theorem::GeneratorQc {
        let d = path.d_dims();
        let times = qc_times(&grid);
        for i in 0..d {
            for j in i..d {
                for &(a, ta) in &times {
                    for &(b, tb) in &times {
                        let v = path.values[[i, a]] * path.values[[j, b]];
                        push(Key { quantity: Quantity::PathProduct, n: grid.fine_steps(), t: ta, s: tb, i, j }, v);
                    }
                }
            }
        }
        return Ok(Replication { index, records, keys, values });
    }

    let pair = build(&e.integrand, &path)?;
    let (m, d) = (pair.m_dims(), pair.d_dims());
    let scheme = ReferenceScheme::for_hurst(e.h);

    for &t in &e.t_list {
        let half = 0.5 * weight_integral(&pair, &path, t)?;
        for i in 0..m {
            for j in 0..d {
                push(Key::new(Quantity::HalfWeightIntegral, 0, t, i, j), half[[i, j]]);
                if e.theorem == Theorem::Clt {
                    push(
                        Key::new(Quantity::WeightSquareIntegral, 0, t, i, j),
                        weight_square_integral(&pair, &path, i, j, t)?,
                    );
                }
            }
        }
    }

    for &n in &e.n_list {
        let scale = nu(e.h, n as u64)?;
        for &t in &e.t_list {
            let rec = error_process(&pair, &path, n, t, scheme, index)?;
            for i in 0..m {
                for j in 0..d {
                    let c = centered_error(&rec, i, j);
                    push(Key::new(Quantity::Centered, n, t, i, j), c);
                    match e.theorem {
                        Theorem::Clt => push(Key::new(Quantity::Normalized, n, t, i, j), scale * c),
                        Theorem::Rosenblatt => {
                            let z = weighted_rosenblatt(&pair, &path, i, j, t, n)?;
                            push(Key::new(Quantity::RosenblattApprox, n, t, i, j), z);
                            push(Key::new(Quantity::RosenblattGap, n, t, i, j), scale * c - z);
                        }
                        _ => {}
                    }
                }
            }
            if e.theorem == Theorem::Drift {
                let weight = pair.u.row(0);
                let limit_pair = ProcessPair {
                    u: pair.u.slice(ndarray::s![0..1, ..]).to_owned(),
                    p: pair.p.slice(ndarray::s![0..1, .., ..]).to_owned(),
                    label: pair.label.clone(),
                };
                let norm = scale * (n as f64).powf(e.h.two_h() - 1.0);
                for i in 0..d {
                    let sum = weighted_drift_sum(weight, &path, i, t, n)?;
                    let limit = if e.h.regime() == Regime::High {
                        0.5 * fine_integral(&limit_pair, &path, i, t, scheme)?[0]
                    } else {
                        0.0
                    };
                    push(Key::new(Quantity::DriftError, n, t, 0, i), norm * sum - limit);
                }
            }
            records.push(rec);
        }
    }
    Ok(Replication { index, records, keys, values })
}

fn qc_times(grid: &SimGrid) -> Vec<(usize, f64)> {
    let steps = grid.fine_steps();
    (1..=QC_TIMES)
        .map(|k| {
            let idx = k * steps / QC_TIMES;
            (idx, grid.fine_time(idx))
        })
        .collect()
}

/// Runs all replications on `workers` threads and aggregates them.
pub fn run_experiment(e: &Experiment, workers: usize) -> Result<McReport> {
    run_experiment_with_samples(e, workers).map(|(report, _)| report)
}

/// [`run_experiment`], also returning the raw replications.
pub fn run_experiment_with_samples(e: &Experiment, workers: usize) -> Result<(McReport, Vec<Replication>)> {
    let start = Instant::now();
    let reps = run_replications(e, workers)?;
    let mut report = aggregate(e, &reps)?;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((report, reps))
}

/// Replications `0..e.replications` in index order.
pub fn run_replications(e: &Experiment, workers: usize) -> Result<Vec<Replication>> {
    e.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|err| Error::Config(format!("cannot start worker pool: {err}")))?;
    pool.install(|| {
        (0..e.replications as u64)
            .into_par_iter()
            .map(|r| replicate(e, r))
            .collect::<Result<Vec<_>>>()
    })
}

/// Mean, variance and standard errors of `x` and of `(x - target)^2`.
pub fn summarize(key: Key, target: f64, x: &[f64]) -> Estimate {
    let r = x.len() as f64;
    let mean = x.iter().sum::<f64>() / r;
    let centred: Vec<f64> = x.iter().map(|v| (v - mean).powi(2)).collect();
    let variance = centred.iter().sum::<f64>() / (r - 1.0);
    let m4 = centred.iter().map(|c| c * c).sum::<f64>() / r;
    let biased = variance * (r - 1.0) / r;
    let variance_se = ((m4 - biased * biased).max(0.0) / r).sqrt();
    let sq: Vec<f64> = x.iter().map(|v| (v - target).powi(2)).collect();
    let mse = sq.iter().sum::<f64>() / r;
    let mse_var = sq.iter().map(|s| (s - mse).powi(2)).sum::<f64>() / (r - 1.0);
    Estimate {
        key,
        target,
        mean,
        se: (variance / r).sqrt(),
        variance,
        variance_se,
        mse,
        mse_se: (mse_var / r).sqrt(),
    }
}

/// Least-squares slope of `ln mse` against `ln n` with its standard error.
pub fn rate_slope(mse_by_n: &[(usize, f64)]) -> Result<(f64, f64)> {
    if mse_by_n.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 points, got {}", mse_by_n.len())));
    }
    if let Some((n, _)) = mse_by_n.iter().find(|(n, _)| !n.is_power_of_two()) {
        return Err(Error::DegenerateFit(format!("n={n} is not dyadic")));
    }
    if let Some((n, v)) = mse_by_n.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::DegenerateFit(format!("mse={v} at n={n} is not positive")));
    }
    let pts: Vec<(f64, f64)> = mse_by_n.iter().map(|&(n, v)| ((n as f64).ln(), v.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let stderr = (rss / (k - 2.0) / sxx).sqrt();
    Ok((slope, stderr))
}

/// Predicted log-log slope of the centred MSE: `-2 ln ν_H(n) / ln n`, with
/// the logarithmic factor at `H = 3/4` dropped.
pub fn expected_rate_slope(h: HurstIndex) -> f64 {
    match h.regime() {
        Regime::Brownian | Regime::Low | Regime::Critical => -1.0,
        Regime::High => -(4.0 - 2.0 * h.two_h()),
    }
}

/// Kolmogorov distribution tail `P(K > lambda)`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// KS test of `samples` against the normal law with the sample mean and
/// variance. Returns `(D, p)`; `p` uses the Kolmogorov asymptotics with
/// Stephens' finite-sample correction and is approximate because the
/// parameters are estimated.
pub fn normality_test(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.len() < KS_MIN_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "normality test needs at least {KS_MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let r = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / r;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Ok((1.0, 0.0));
    }
    let law = Normal::new(mean, sd).map_err(|err| Error::InvalidInput(err.to_string()))?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut d: f64 = 0.0;
    for (k, x) in sorted.iter().enumerate() {
        let f = law.cdf(*x);
        d = d.max(f - k as f64 / r).max((k + 1) as f64 / r - f);
    }
    let sqrt_r = r.sqrt();
    Ok((d, kolmogorov_tail((sqrt_r + 0.12 + 0.11 / sqrt_r) * d)))
}

/// Compares the sample variance with `target`; the 95% interval comes from
/// `BOOTSTRAP_RESAMPLES` seeded resamples.
pub fn variance_vs_target(samples: &[f64], target: f64, rel_tol: f64, seed: u64) -> Result<VarianceCheck> {
    if !(target > 0.0) {
        return Err(Error::InvalidInput(format!("variance target must be positive, got {target}")));
    }
    if samples.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 samples".into()));
    }
    let var = |xs: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = xs.collect();
        let r = v.len() as f64;
        let m = v.iter().sum::<f64>() / r;
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (r - 1.0)
    };
    let estimate = var(&mut samples.iter().copied());
    let mut rng = aux_stream(seed, BOOTSTRAP_TAG);
    let len = samples.len();
    let mut boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| var(&mut (0..len).map(|_| samples[rng.random_range(0..len)])))
        .collect();
    boot.sort_by(f64::total_cmp);
    let at = |q: f64| boot[((q * (BOOTSTRAP_RESAMPLES - 1) as f64).round()) as usize];
    let rel_err = (estimate - target).abs() / target;
    Ok(VarianceCheck {
        estimate,
        target,
        rel_err,
        ci_low: at(0.025),
        ci_high: at(0.975),
        rel_tol,
        pass: rel_err < rel_tol,
    })
}

/// Largest step-to-step increase of `xs`; steps that land at or below
/// [`ZERO_FLOOR`] count as no increase.
pub fn worst_increase(xs: &[f64]) -> f64 {
    xs.windows(2)
        .map(|w| if w[1] <= ZERO_FLOOR { f64::NEG_INFINITY } else { w[1] - w[0] })
        .fold(f64::NEG_INFINITY, f64::max)
        .max(-f64::MAX)
}

/// Column of values for `key` across replications.
fn column(reps: &[Replication], pos: usize) -> Vec<f64> {
    reps.iter().map(|r| r.values[pos]).collect()
}

fn tag(n: usize, t: f64, i: usize, j: usize) -> String {
    format!("n={n},t={t},i={i},j={j}")
}

/// Deterministic sequential fold of replications into a report.
pub fn aggregate(e: &Experiment, reps: &[Replication]) -> Result<McReport> {
    let first = reps.first().ok_or_else(|| Error::InvalidInput("no replications".into()))?;
    let keys = &first.keys;
    if reps.iter().any(|r| r.keys.len() != keys.len()) {
        return Err(Error::InvalidInput("replications disagree on layout".into()));
    }
    let samples: Vec<Vec<f64>> = (0..keys.len()).map(|p| column(reps, p)).collect();
    let find = |q: Quantity, n: usize, t: f64, i: usize, j: usize| -> Option<usize> {
        keys.iter().position(|k| k.quantity == q && k.n == n && k.t == t && k.i == i && k.j == j)
    };

    let mut estimates = Vec::with_capacity(keys.len());
    for (key, xs) in keys.iter().zip(&samples) {
        let target = match key.quantity {
            Quantity::PathProduct if key.i == key.j => cov_r(e.h, 0.0, key.t, 0.0, key.s)?,
            _ => 0.0,
        };
        estimates.push(summarize(*key, target, xs));
    }
    let est = |q: Quantity, n: usize, t: f64, i: usize, j: usize| find(q, n, t, i, j).map(|p| &estimates[p]);

    let mut report = McReport {
        schema: SCHEMA_VERSION,
        experiment: e.clone(),
        estimates: Vec::new(),
        slopes: Vec::new(),
        ks: Vec::new(),
        variance_checks: Vec::new(),
        criteria: Vec::new(),
        pass: false,
        caveats: Vec::new(),
        wall_time: 0.0,
    };
    let (m, d) = e.integrand.dims();
    let n_max = e.n_max();

    match e.theorem {
        Theorem::GeneratorQc => {
            let mut worst: f64 = 0.0;
            let mut violations = 0usize;
            for est in &estimates {
                let z = (est.mean - est.target).abs() / est.se.max(f64::MIN_POSITIVE);
                worst = worst.max(z);
                if (est.mean - est.target).abs() > MEAN_SE_BAND * est.se {
                    violations += 1;
                }
            }
            report.criteria.push(Criterion::at_most("generator_qc.violations".into(), violations as f64, 0.0));
            report.caveats.push(format!("largest |mean - target| / SE over all products: {worst:.3}"));
        }
        Theorem::FirstOrder => {
            for &t in &e.t_list {
                for i in 0..m {
                    for j in 0..d {
                        let mses: Vec<f64> = e
                            .n_list
                            .iter()
                            .map(|&n| est(Quantity::Centered, n, t, i, j).map_or(f64::NAN, |x| x.mse))
                            .collect();
                        let tg = tag(n_max, t, i, j);
                        if mses.len() >= 2 {
                            report.criteria.push(Criterion::at_most(
                                format!("first_order.mse_decreasing[{tg}]"),
                                worst_increase(&mses),
                                0.0,
                            ));
                        }
                        let weight = est(Quantity::HalfWeightIntegral, 0, t, i, j).map_or(0.0, |x| x.variance);
                        let last = est(Quantity::Centered, n_max, t, i, j).expect("centred estimate");
                        if weight > 0.0 {
                            report.criteria.push(Criterion::at_most(
                                format!("first_order.final_mse_over_weight_variance[{tg}]"),
                                last.mse / weight,
                                FIRST_ORDER_REL_MSE,
                            ));
                        } else {
                            report.criteria.push(Criterion::at_most(
                                format!("first_order.mean_in_se_band[{tg}]"),
                                last.mean.abs(),
                                MEAN_SE_BAND * last.se,
                            ));
                        }
                    }
                }
            }
        }
        Theorem::Clt => {
            let lc = constants(e.h)?;
            let deterministic = matches!(
                e.integrand,
                IntegrandSpec::IdentityB { .. } | IntegrandSpec::Constant { .. }
            );
            if !deterministic {
                report.caveats.push(
                    "random weights give a Gaussian mixture limit: normality not tested".into(),
                );
            }
            if e.replications < KS_MIN_SAMPLES {
                report.caveats.push(format!("fewer than {KS_MIN_SAMPLES} replications: normality not tested"));
            }
            report.caveats.push(
                "KS p-values use estimated parameters and the Kolmogorov asymptotic law (approximate)".into(),
            );
            if e.h.is_brownian() {
                report.caveats.push("H = 1/2: statistic is the uncorrected M^n (Itô reference)".into());
            }
            for &t in &e.t_list {
                for i in 0..m {
                    for j in 0..d {
                        let target: f64 = (0..d)
                            .map(|k| {
                                let factor = if k == j {
                                    diag_variance_factor(&lc)
                                } else {
                                    off_diag_variance_factor(&lc)
                                };
                                factor * est(Quantity::WeightSquareIntegral, 0, t, i, k).map_or(0.0, |x| x.mean)
                            })
                            .sum();
                        let pos = find(Quantity::Normalized, n_max, t, i, j).expect("normalized samples");
                        let xs = &samples[pos];
                        let ex = &estimates[pos];
                        let tg = tag(n_max, t, i, j);
                        report.criteria.push(Criterion::at_most(
                            format!("clt.mean_in_se_band[{tg}]"),
                            ex.mean.abs(),
                            MEAN_SE_BAND * ex.se,
                        ));
                        if target > 0.0 {
                            let vc = variance_vs_target(xs, target, e.variance_tol, e.base_seed)?;
                            report.criteria.push(Criterion::at_most(
                                format!("clt.variance_rel_err[{tg}]"),
                                vc.rel_err,
                                e.variance_tol,
                            ));
                            report.variance_checks.push(vc);
                        }
                        if deterministic && xs.len() >= KS_MIN_SAMPLES && target > 0.0 {
                            let (stat, p) = normality_test(xs)?;
                            report.ks.push(KsResult {
                                n: n_max,
                                t,
                                i,
                                j,
                                statistic: stat,
                                p_value: p,
                                approximate: true,
                            });
                            report.criteria.push(Criterion::above(format!("clt.ks_p[{tg}]"), p, KS_ALPHA));
                        }
                    }
                }
            }
        }
        Theorem::Rosenblatt => {
            let identity = matches!(e.integrand, IntegrandSpec::IdentityB { .. });
            for &t in &e.t_list {
                for i in 0..m {
                    for j in 0..d {
                        let mut rel = Vec::new();
                        for &n in &e.n_list {
                            let gap = est(Quantity::RosenblattGap, n, t, i, j).expect("gap");
                            let z = est(Quantity::RosenblattApprox, n, t, i, j).expect("z");
                            let z2 = z.variance * (e.replications - 1) as f64 / e.replications as f64
                                + z.mean * z.mean;
                            rel.push(if z2 > 0.0 { gap.mse / z2 } else { gap.mse });
                            if identity && i == j && e.horizon == 1.0 {
                                let exact = rosenblatt_approx_variance(e.h, n, t)?;
                                let pos = find(Quantity::RosenblattApprox, n, t, i, j).expect("z");
                                let vc = variance_vs_target(&samples[pos], exact, e.variance_tol, e.base_seed)?;
                                report.criteria.push(Criterion::at_most(
                                    format!("rosenblatt.z_variance_vs_isserlis[{}]", tag(n, t, i, j)),
                                    vc.rel_err,
                                    e.variance_tol,
                                ));
                                report.variance_checks.push(vc);
                            }
                        }
                        let tg = tag(n_max, t, i, j);
                        let last = *rel.last().expect("n_list is non-empty");
                        report.criteria.push(Criterion::at_most(
                            format!("rosenblatt.relative_l2_gap[{tg}]"),
                            last,
                            L2_GAP_BOUND,
                        ));
                        if rel.len() >= 2 {
                            report.criteria.push(Criterion::at_most(
                                format!("rosenblatt.gap_decreasing[{tg}]"),
                                worst_increase(&rel),
                                0.0,
                            ));
                        }
                    }
                }
            }
        }
        Theorem::RateSlope => {
            let expected = expected_rate_slope(e.h);
            if e.h.regime() == Regime::Critical {
                report.caveats.push("H = 3/4: the ln n factor of the rate is ignored by the slope".into());
            }
            for &t in &e.t_list {
                for i in 0..m {
                    for j in 0..d {
                        let pts: Vec<(usize, f64)> = e
                            .n_list
                            .iter()
                            .map(|&n| (n, est(Quantity::Centered, n, t, i, j).map_or(f64::NAN, |x| x.mse)))
                            .collect();
                        if pts.iter().all(|p| p.1 == 0.0) {
                            report.caveats.push(format!("zero error at t={t}, i={i}, j={j}: no slope"));
                            continue;
                        }
                        let (slope, stderr) = rate_slope(&pts)?;
                        report.slopes.push(SlopeEstimate { t, i, j, slope, stderr, expected });
                        report.criteria.push(Criterion::at_most(
                            format!("rate_slope.abs_deviation[t={t},i={i},j={j}]"),
                            (slope - expected).abs(),
                            SLOPE_TOL,
                        ));
                    }
                }
            }
        }
        Theorem::Drift => {
            for &t in &e.t_list {
                for i in 0..d {
                    let mses: Vec<f64> = e
                        .n_list
                        .iter()
                        .map(|&n| est(Quantity::DriftError, n, t, 0, i).map_or(f64::NAN, |x| x.mse))
                        .collect();
                    let tg = tag(n_max, t, 0, i);
                    report.criteria.push(Criterion::at_most(
                        format!("drift.final_mse[{tg}]"),
                        *mses.last().expect("n_list is non-empty"),
                        DRIFT_MSE_BOUND,
                    ));
                    if e.h.regime() != Regime::High && mses.len() >= 2 {
                        report.criteria.push(Criterion::at_most(
                            format!("drift.mse_decreasing[{tg}]"),
                            worst_increase(&mses),
                            0.0,
                        ));
                    }
                }
            }
        }
    }

    report.estimates = estimates;
    if report.criteria.iter().any(|c| c.name.contains("decreasing")) {
        report.caveats.push(format!("values at or below {ZERO_FLOOR:e} count as zero in monotonicity checks"));
    }
    report.pass = !report.criteria.is_empty() && report.criteria.iter().all(|c| c.pass);
    Ok(report)
}

/// Per-replication values of one statistic, in replication order.
pub fn samples_of(reps: &[Replication], quantity: Quantity, n: usize, t: f64, i: usize, j: usize) -> Option<Array1<f64>> {
    let first = reps.first()?;
    let pos = first
        .keys
        .iter()
        .position(|k| k.quantity == quantity && k.n == n && k.t == t && k.i == i && k.j == j)?;
    Some(reps.iter().map(|r| r.values[pos]).collect())
}
