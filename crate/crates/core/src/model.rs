//! Shared data model and the closed-form scalar functions of the fBm setting.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array3, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hurst parameter `H` in `[1/2, 1)`.
///
/// Regime boundaries are compared exactly, so values parsed from decimal
/// input such as `0.75` land deterministically in the critical branch.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstIndex(f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `H = 1/2`
    Brownian,
    /// `1/2 < H < 3/4`
    Low,
    /// `H = 3/4`
    Critical,
    /// `3/4 < H < 1`
    High,
}

impl HurstIndex {
    pub const BROWNIAN: HurstIndex = HurstIndex(0.5);

    pub fn new(h: f64) -> Result<Self> {
        if h.is_finite() && (0.5..1.0).contains(&h) {
            Ok(HurstIndex(h))
        } else {
            Err(Error::InvalidHurst(h))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `2H`, the exponent of the fBm variance.
    #[inline]
    pub fn two_h(self) -> f64 {
        2.0 * self.0
    }

    pub fn regime(self) -> Regime {
        let h = self.0;
        if h == 0.5 {
            Regime::Brownian
        } else if h < 0.75 {
            Regime::Low
        } else if h == 0.75 {
            Regime::Critical
        } else {
            Regime::High
        }
    }

    pub fn is_brownian(self) -> bool {
        self.regime() == Regime::Brownian
    }

    /// `H(2H-1)`, the constant in front of the fBm kernel `|u-v|^{2H-2}`.
    pub fn kernel_constant(self) -> f64 {
        self.0 * (2.0 * self.0 - 1.0)
    }
}

impl TryFrom<f64> for HurstIndex {
    type Error = Error;
    fn try_from(h: f64) -> Result<Self> {
        HurstIndex::new(h)
    }
}

impl From<HurstIndex> for f64 {
    fn from(h: HurstIndex) -> f64 {
        h.0
    }
}

impl FromStr for HurstIndex {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let h: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("not a number: `{s}`")))?;
        HurstIndex::new(h)
    }
}

impl fmt::Display for HurstIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Fine simulation grid: `n_coarse * refine_m` steps over `[0, horizon]`.
///
/// Coarse node `k` is fine node `k * refine_m`; node times are always computed
/// from integers so the two grids line up exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    pub horizon: f64,
    pub n_coarse: usize,
    pub refine_m: usize,
    pub d_dims: usize,
}

impl SimGrid {
    pub fn new(horizon: f64, n_coarse: usize, refine_m: usize, d_dims: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        if n_coarse < 2 {
            return Err(Error::InvalidGrid(format!("n_coarse must be >= 2, got {n_coarse}")));
        }
        if refine_m < 1 {
            return Err(Error::InvalidGrid("refine_m must be >= 1".into()));
        }
        if d_dims < 1 {
            return Err(Error::InvalidGrid("d_dims must be >= 1".into()));
        }
        Ok(SimGrid { horizon, n_coarse, refine_m, d_dims })
    }

    /// Number of fine steps `n * m`.
    #[inline]
    pub fn fine_steps(&self) -> usize {
        self.n_coarse * self.refine_m
    }

    #[inline]
    pub fn fine_step(&self) -> f64 {
        self.horizon / self.fine_steps() as f64
    }

    #[inline]
    pub fn coarse_step(&self) -> f64 {
        self.horizon / self.n_coarse as f64
    }

    #[inline]
    pub fn fine_time(&self, i: usize) -> f64 {
        i as f64 * self.horizon / self.fine_steps() as f64
    }

    #[inline]
    pub fn coarse_time(&self, k: usize) -> f64 {
        self.fine_time(k * self.refine_m)
    }

    /// Index of `t` on the fine grid, if `t` is a fine node.
    pub fn fine_index(&self, t: f64) -> Result<usize> {
        let steps = self.fine_steps();
        let x = t / self.horizon * steps as f64;
        let i = x.round();
        if !(0.0..=steps as f64).contains(&i) || (x - i).abs() > 1e-9 * steps as f64 {
            return Err(Error::InvalidGrid(format!("t={t} is not a node of the fine grid")));
        }
        Ok(i as usize)
    }

    /// Index of `t` on the fine grid, requiring it to be a coarse node.
    pub fn coarse_node_index(&self, t: f64) -> Result<usize> {
        let i = self.fine_index(t)?;
        if i % self.refine_m != 0 {
            return Err(Error::InvalidGrid(format!("t={t} is not a coarse node")));
        }
        Ok(i)
    }

    /// Grid with the same fine resolution but `n` coarse steps.
    pub fn with_coarse(&self, n: usize) -> Result<Self> {
        let fine = self.fine_steps();
        if n < 2 || fine % n != 0 {
            return Err(Error::InvalidGrid(format!(
                "n={n} does not divide the fine grid of {fine} steps"
            )));
        }
        SimGrid::new(self.horizon, n, fine / n, self.d_dims)
    }
}

/// `d` fBm components sampled on the fine grid of `grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    /// `d x (n*m + 1)`; column 0 is the origin.
    pub values: Array2<f64>,
    pub seed: u64,
    pub stream: u64,
    pub grid: SimGrid,
    pub hurst: HurstIndex,
}

impl FbmPath {
    #[inline]
    pub fn component(&self, j: usize) -> ArrayView1<'_, f64> {
        self.values.row(j)
    }

    pub fn d_dims(&self) -> usize {
        self.values.nrows()
    }

    pub fn fine_len(&self) -> usize {
        self.values.ncols()
    }
}

/// Integrand `u` (`m` components) and weight process `P` (`m x d`), both on
/// the fine grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessPair {
    pub u: Array2<f64>,
    pub p: Array3<f64>,
    pub label: String,
}

impl ProcessPair {
    pub fn m_dims(&self) -> usize {
        self.u.nrows()
    }

    pub fn d_dims(&self) -> usize {
        self.p.shape()[1]
    }

    pub fn check_conforms(&self, path: &FbmPath) -> Result<()> {
        let len = path.fine_len();
        let (m, d) = (self.m_dims(), self.d_dims());
        if self.u.ncols() != len || self.p.shape() != [m, d, len] || d != path.d_dims() {
            return Err(Error::InvalidInput(format!(
                "process pair `{}` has shapes u={:?}, p={:?}; path is {}x{}",
                self.label,
                self.u.shape(),
                self.p.shape(),
                path.d_dims(),
                len
            )));
        }
        Ok(())
    }
}

/// `E[(B_t - B_s)(B_y - B_x)]` for a one-dimensional fBm, without argument checks.
#[inline]
pub(crate) fn cov_r_unchecked(two_h: f64, s: f64, t: f64, x: f64, y: f64) -> f64 {
    let a = (t - x).abs().powf(two_h);
    let b = (s - y).abs().powf(two_h);
    let c = (s - x).abs().powf(two_h);
    let d = (t - y).abs().powf(two_h);
    // Grouped so that swapping the two intervals is exact and s == t or
    // x == y cancels exactly.
    0.5 * ((a + b) - (c + d))
}

/// Covariance of the fBm increments over `[s, t]` and `[x, y]`.
pub fn cov_r(h: HurstIndex, s: f64, t: f64, x: f64, y: f64) -> Result<f64> {
    if !(s <= t && x <= y) || s < 0.0 || x < 0.0 {
        return Err(Error::UnorderedArguments { s, t, x, y });
    }
    Ok(cov_r_unchecked(h.two_h(), s, t, x, y))
}

/// Rate function at zero, `kappa_H(u)` for `u` in `(0, 1]`.
pub fn kappa(h: HurstIndex, u: f64) -> Result<f64> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::Domain(format!("kappa requires 0 < u <= 1, got {u}")));
    }
    Ok(match h.regime() {
        Regime::Brownian | Regime::Low => u.sqrt(),
        Regime::Critical => (u * (1.0 / u).ln()).sqrt(),
        Regime::High => u.powf(2.0 - h.two_h()),
    })
}

/// Rate function at infinity, `nu_H(n)`.
pub fn nu(h: HurstIndex, n: u64) -> Result<f64> {
    let min = if h.regime() == Regime::Critical { 2 } else { 1 };
    if n < min {
        return Err(Error::Domain(format!("nu requires n >= {min} at H={h}, got {n}")));
    }
    let x = n as f64;
    Ok(match h.regime() {
        Regime::Brownian | Regime::Low => x.sqrt(),
        Regime::Critical => (x / x.ln()).sqrt(),
        Regime::High => x.powf(2.0 - h.two_h()),
    })
}

/// Constant `K_T` with `|t-s||y-x| <= K_T r_H(s,t,x,y)` on `[0, T]`, `H > 1/2`.
///
/// Follows from `r_H = H(2H-1) * int int |a-b|^{2H-2}` and `|a-b| <= T`.
pub fn joint_increment_lower_constant(h: HurstIndex, horizon: f64) -> Result<f64> {
    if h.is_brownian() {
        return Err(Error::Regime("the lower bound needs H > 1/2".into()));
    }
    Ok(horizon.powf(2.0 - h.two_h()) / h.kernel_constant())
}
