//! Series constants `q_H`, `r_H` that set the variance of the Brownian limit
//! of the error process in the Gaussian regime `1/2 <= H <= 3/4`.
//!
//! For `1/2 < H < 3/4` each constant is a sum over `p` of inner products of
//! triangle indicators in the tensor-square of the fBm Hilbert space,
//!
//! ```text
//! <1_A, 1_B> = c_H^2 ∫∫∫∫ 1_A(u,t) 1_B(s,v) |u-s|^{2H-2} |t-v|^{2H-2},   c_H = H(2H-1).
//! ```
//!
//! The `(t, v)` integration is done in closed form (it is the increment
//! covariance `r_H` of the two second-coordinate intervals); only the outer
//! `(u, s)` pair is integrated numerically, with a power substitution that
//! removes the `|u-s|^{2H-2}` singularity, and tanh-sinh rules absorb the
//! remaining endpoint kinks.

use std::collections::HashMap;
use std::sync::{OnceLock, RwLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::unit_autocov;
use crate::model::{cov_r_unchecked, HurstIndex, Regime};

/// Which half of the square `[lo, hi]^2` a triangle covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// `{lo <= x <= y <= hi}`
    FirstLeSecond,
    /// `{lo <= y <= x <= hi}`
    SecondLeFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    pub lo: f64,
    pub hi: f64,
    pub orientation: Orientation,
}

impl Triangle {
    pub fn new(lo: f64, hi: f64, orientation: Orientation) -> Self {
        assert!(lo < hi, "empty triangle [{lo}, {hi}]");
        Triangle { lo, hi, orientation }
    }

    /// Range of the second coordinate given the first.
    fn second_range(&self, first: f64) -> (f64, f64) {
        match self.orientation {
            Orientation::FirstLeSecond => (first, self.hi),
            Orientation::SecondLeFirst => (self.lo, first),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitConstants {
    pub h: HurstIndex,
    pub q: f64,
    pub r: f64,
    /// Number of explicitly integrated series terms on each side of `p = 0`.
    pub truncation_p: usize,
    /// Sum of the quadrature refinement differences over all evaluated terms.
    pub quadrature_err: f64,
    /// Alternative value sometimes quoted for `q_{1/2}` (`1/sqrt 2`); reported
    /// for comparison only, never used.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q_alt: Option<f64>,
}

/// Variance rate of the diagonal Brownian limit entries, `q + r`.
pub fn diag_variance_factor(c: &LimitConstants) -> f64 {
    c.q + c.r
}

/// Variance rate of the off-diagonal Brownian limit entries, `(q - r) + r = q`.
pub fn off_diag_variance_factor(c: &LimitConstants) -> f64 {
    c.q
}

/// Tanh-sinh quadrature on `[a, b]` with step `2^-level`.
///
/// Nodes are placed by their distance to the nearer endpoint, so algebraic
/// endpoint singularities are sampled without cancellation.
fn tanh_sinh<F: FnMut(f64) -> f64>(a: f64, b: f64, level: u32, mut f: F) -> f64 {
    if b <= a {
        return 0.0;
    }
    let half = 0.5 * (b - a);
    let step = (-(level as f64)).exp2();
    let mut sum = half * std::f64::consts::FRAC_PI_2 * f(a + half);
    let mut k = 1u32;
    loop {
        let t = k as f64 * step;
        let y = std::f64::consts::FRAC_PI_2 * t.sinh();
        // 1 - tanh(y) = 2 / (1 + e^{2y})
        let gap = 2.0 / (1.0 + (2.0 * y).exp());
        let w = std::f64::consts::FRAC_PI_2 * t.cosh() / y.cosh().powi(2);
        let d = half * gap;
        if d <= 0.0 || w * half < 1e-300 || d < f64::MIN_POSITIVE {
            break;
        }
        sum += half * w * (f(a + d) + f(b - d));
        k += 1;
    }
    sum * step
}

fn split_points(lo: f64, hi: f64, extra: &[f64]) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    pts.extend(extra.iter().copied().filter(|&x| x > lo && x < hi));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

struct Quad {
    two_h: f64,
    /// `2H - 1`
    alpha: f64,
}

impl Quad {
    /// `∫_{s in B.first} |u-s|^{2H-2} r_H(A.second(u), B.second(s)) ds`
    fn inner(&self, a: &Triangle, b: &Triangle, u: f64, level: u32) -> f64 {
        let (t0, t1) = a.second_range(u);
        let g = |s: f64| {
            let (v0, v1) = b.second_range(s);
            cov_r_unchecked(self.two_h, t0, t1, v0, v1)
        };
        let pts = split_points(b.lo, b.hi, &[u, a.lo, a.hi]);
        let mut total = 0.0;
        for win in pts.windows(2) {
            let (lo, hi) = (win[0], win[1]);
            if lo == u || hi == u {
                // s = u ± w, w = z^{1/alpha}: |u-s|^{2H-2} ds = dz / alpha.
                let sign = if lo == u { 1.0 } else { -1.0 };
                let zmax = (hi - lo).powf(self.alpha);
                let inv = 1.0 / self.alpha;
                total += tanh_sinh(0.0, zmax, level, |z| g(u + sign * z.powf(inv))) / self.alpha;
            } else {
                total += tanh_sinh(lo, hi, level, |s| (u - s).abs().powf(self.two_h - 2.0) * g(s));
            }
        }
        total
    }

    fn outer(&self, a: &Triangle, b: &Triangle, level: u32) -> f64 {
        let pts = split_points(a.lo, a.hi, &[b.lo, b.hi]);
        pts.windows(2)
            .map(|w| tanh_sinh(w[0], w[1], level, |u| self.inner(a, b, u, level)))
            .sum()
    }
}

fn gaps(a: &Triangle, b: &Triangle) -> f64 {
    (b.lo - a.hi).max(a.lo - b.hi).max(0.0)
}

/// `<1_A, 1_B>` with its quadrature refinement difference.
pub fn inner_product_with_error(h: HurstIndex, a: &Triangle, b: &Triangle) -> Result<(f64, f64)> {
    if h.is_brownian() {
        // The kernel collapses to a point mass: the inner product is the area of A ∩ B.
        let len = (a.hi.min(b.hi) - a.lo.max(b.lo)).max(0.0);
        let area = if a.orientation == b.orientation { 0.5 * len * len } else { 0.0 };
        return Ok((area, 0.0));
    }
    let quad = Quad { two_h: h.two_h(), alpha: h.two_h() - 1.0 };
    let base = if gaps(a, b) > 0.5 * (a.hi - a.lo).max(b.hi - b.lo) { 3 } else { 4 };
    let c = h.kernel_constant();
    let coarse = c * quad.outer(a, b, base);
    let fine = c * quad.outer(a, b, base + 1);
    let err = (fine - coarse).abs();
    if err > 1e-9 * fine.abs().max(1e-12) {
        return Err(Error::QuadratureNotConverged { coarse, fine });
    }
    Ok((fine, err))
}

/// `<1_A, 1_B>` in the tensor-square of the fBm Hilbert space.
pub fn inner_product_indicator2(h: HurstIndex, a: &Triangle, b: &Triangle) -> Result<f64> {
    inner_product_with_error(h, a, b).map(|(v, _)| v)
}

fn unit_triangle(orientation: Orientation) -> Triangle {
    Triangle::new(0.0, 1.0, orientation)
}

fn shifted_lower(p: i64) -> Triangle {
    Triangle::new(p as f64, p as f64 + 1.0, Orientation::FirstLeSecond)
}

/// `(T_q(p), T_r(p), quadrature error)` for one series term.
///
/// Terms are even in `p`; the negative shift is the one whose corner
/// singularity the quadrature resolves fastest.
fn series_term(h: HurstIndex, p: i64) -> Result<(f64, f64, f64)> {
    let b = shifted_lower(-p.abs());
    let (q, eq) = inner_product_with_error(h, &unit_triangle(Orientation::FirstLeSecond), &b)?;
    let (r, er) = inner_product_with_error(h, &unit_triangle(Orientation::SecondLeFirst), &b)?;
    Ok((q, r, eq + er))
}

const MAX_TRUNCATION: usize = 1024;
const DIFF_TAIL_TARGET: f64 = 1e-7;
const RHO_DIRECT_TERMS: u64 = 1 << 20;

/// `sum_{p > from} rho(p)^2` for the unit-step fGn autocovariance.
fn rho_squared_tail(h: HurstIndex, from: u64) -> f64 {
    let two_h = h.two_h();
    let direct: f64 = (from + 1..=RHO_DIRECT_TERMS.max(from))
        .rev()
        .map(|p| unit_autocov(two_h, p).powi(2))
        .sum();
    let x = RHO_DIRECT_TERMS.max(from) as f64 + 0.5;
    let c = h.kernel_constant();
    let expo = 4.0 * h.value() - 3.0;
    direct + c * c * x.powf(expo) / -expo
}

fn series_constants(h: HurstIndex, fixed_truncation: Option<usize>) -> Result<LimitConstants> {
    let hv = h.value();
    let mut terms: Vec<(f64, f64, f64)> = Vec::new();
    let mut truncation = 0usize;
    // Terms are evaluated in fixed-size batches in parallel and appended in order.
    loop {
        let start = terms.len() as i64;
        let batch: Vec<_> = (start..start + 16)
            .into_par_iter()
            .map(|p| series_term(h, p))
            .collect::<Result<_>>()?;
        terms.extend(batch);
        let done = match fixed_truncation {
            Some(pt) => {
                if terms.len() > pt {
                    truncation = pt;
                    true
                } else {
                    false
                }
            }
            None => {
                let hit = (4..terms.len()).find(|&p| {
                    let diff = (terms[p].0 - terms[p].1).abs();
                    diff * p as f64 / (5.0 - 4.0 * hv) < DIFF_TAIL_TARGET
                });
                if let Some(p) = hit {
                    truncation = p;
                    true
                } else {
                    false
                }
            }
        };
        if done {
            break;
        }
        if terms.len() > MAX_TRUNCATION {
            return Err(Error::QuadratureNotConverged {
                coarse: terms[terms.len() - 2].0,
                fine: terms[terms.len() - 1].0,
            });
        }
    }
    terms.truncate(truncation + 1);

    let mut q = terms[0].0;
    let mut r = terms[0].1;
    let mut err = terms[0].2;
    for t in &terms[1..] {
        q += 2.0 * t.0;
        r += 2.0 * t.1;
        err += 2.0 * t.2;
    }

    // Beyond the truncation, T_q + T_r = rho(p)^2 / 2 exactly and
    // T_q - T_r ~ C p^{4H-6}.
    let pt = truncation as f64;
    let sum_tail = rho_squared_tail(h, truncation as u64);
    let last = &terms[truncation];
    let decay = 6.0 - 4.0 * hv;
    let amp = (last.0 - last.1) * pt.powf(decay);
    let diff_tail = 2.0 * amp * (pt + 0.5).powf(1.0 - decay) / (decay - 1.0);
    q += 0.5 * (sum_tail + diff_tail);
    r += 0.5 * (sum_tail - diff_tail);

    Ok(LimitConstants { h, q, r, truncation_p: truncation, quadrature_err: err, q_alt: None })
}

/// Series evaluation with an explicit truncation (exposed for stability checks).
pub fn constants_with_truncation(h: HurstIndex, truncation: usize) -> Result<LimitConstants> {
    check_series_regime(h)?;
    series_constants(h, Some(truncation.max(1)))
}

fn check_series_regime(h: HurstIndex) -> Result<()> {
    if h.regime() != Regime::Low {
        return Err(Error::OutOfRegime(format!(
            "the series form of the constants needs 1/2 < H < 3/4, got H={h}"
        )));
    }
    Ok(())
}

static CONSTANTS_CACHE: OnceLock<RwLock<HashMap<u64, LimitConstants>>> = OnceLock::new();

/// `q_H`, `r_H` for `1/2 <= H <= 3/4`.
pub fn constants(h: HurstIndex) -> Result<LimitConstants> {
    match h.regime() {
        Regime::Brownian => Ok(LimitConstants {
            h,
            q: 0.5,
            r: 0.0,
            truncation_p: 0,
            quadrature_err: 0.0,
            q_alt: Some(std::f64::consts::FRAC_1_SQRT_2),
        }),
        Regime::Critical => Ok(LimitConstants {
            h,
            q: 9.0 / 32.0,
            r: 9.0 / 32.0,
            truncation_p: 0,
            quadrature_err: 0.0,
            q_alt: None,
        }),
        Regime::High => Err(Error::OutOfRegime("constants defined only for H ≤ 3/4".into())),
        Regime::Low => {
            let cache = CONSTANTS_CACHE.get_or_init(|| RwLock::new(HashMap::new()));
            let key = h.value().to_bits();
            if let Some(c) = cache.read().expect("constants cache poisoned").get(&key) {
                return Ok(*c);
            }
            let c = series_constants(h, None)?;
            cache.write().expect("constants cache poisoned").insert(key, c);
            Ok(c)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(x: f64) -> HurstIndex {
        HurstIndex::new(x).unwrap()
    }

    fn rho(hv: f64, p: i64) -> f64 {
        let x = p.unsigned_abs();
        unit_autocov(2.0 * hv, x)
    }

    #[test]
    fn special_values() {
        let c = constants(h(0.75)).unwrap();
        assert_eq!((c.q, c.r), (0.28125, 0.28125));
        assert_eq!(diag_variance_factor(&c), 0.5625);
        let c = constants(h(0.5)).unwrap();
        assert_eq!(c.r, 0.0);
        assert_eq!(diag_variance_factor(&c), 0.5);
        assert_eq!(c.q_alt, Some(std::f64::consts::FRAC_1_SQRT_2));
        let e = constants(h(0.9)).unwrap_err();
        assert!(e.to_string().contains("constants defined only for H ≤ 3/4"));
    }

    #[test]
    fn brownian_inner_product_is_intersection_area() {
        let a = unit_triangle(Orientation::FirstLeSecond);
        assert_eq!(inner_product_indicator2(h(0.5), &a, &shifted_lower(0)).unwrap(), 0.5);
        assert_eq!(inner_product_indicator2(h(0.5), &a, &shifted_lower(1)).unwrap(), 0.0);
        let a2 = unit_triangle(Orientation::SecondLeFirst);
        assert_eq!(inner_product_indicator2(h(0.5), &a2, &shifted_lower(0)).unwrap(), 0.0);
    }

    #[test]
    fn term_pairs_sum_to_half_rho_squared() {
        // 1_A + 1_A' = 1_{[0,1]^2}, and <1_{[0,1]^2}, 1_{B_p}> = rho(p)^2 / 2.
        for hv in [0.55, 0.6, 0.7, 0.74] {
            for p in [0i64, 1, 2, 3, 7, 20] {
                let (q, r, _) = series_term(h(hv), p).unwrap();
                let exact = 0.5 * rho(hv, p).powi(2);
                assert!((q + r - exact).abs() < 1e-9 * exact.max(1e-12), "H={hv} p={p}: {} vs {exact}", q + r);
            }
        }
    }

    #[test]
    fn terms_are_symmetric_in_p() {
        let a = unit_triangle(Orientation::FirstLeSecond);
        let a2 = unit_triangle(Orientation::SecondLeFirst);
        for p in [1i64, 2, 5] {
            for tri in [a, a2] {
                let x = inner_product_indicator2(h(0.62), &tri, &shifted_lower(p)).unwrap();
                let y = inner_product_indicator2(h(0.62), &tri, &shifted_lower(-p)).unwrap();
                assert!((x - y).abs() < 1e-7 * x.abs(), "p={p}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn swapping_arguments_keeps_value() {
        let a = unit_triangle(Orientation::SecondLeFirst);
        let b = Triangle::new(0.5, 1.5, Orientation::FirstLeSecond);
        let x = inner_product_indicator2(h(0.66), &a, &b).unwrap();
        let y = inner_product_indicator2(h(0.66), &b, &a).unwrap();
        assert!((x - y).abs() < 1e-10 * x.abs());
    }

    #[test]
    fn far_terms_decay() {
        let a = unit_triangle(Orientation::FirstLeSecond);
        let t = inner_product_indicator2(h(0.6), &a, &shifted_lower(50)).unwrap();
        assert!(t < 1e-4);
        let t_neg = inner_product_indicator2(h(0.6), &a, &shifted_lower(-50)).unwrap();
        assert!(t_neg < 1e-4);
    }

    #[test]
    fn diagonal_factor_matches_half_sum_rho_squared() {
        for hv in [0.55, 0.6, 0.65, 0.7] {
            let c = constants(h(hv)).unwrap();
            let direct = 0.5 * rho(hv, 0).powi(2) + rho_squared_tail(h(hv), 0);
            let rel = (diag_variance_factor(&c) - direct).abs() / direct;
            assert!(rel < 1e-7, "H={hv}: {} vs {direct}", diag_variance_factor(&c));
            assert!(c.q > 0.0 && c.r > 0.0 && c.q > c.r);
        }
    }

    #[test]
    fn stable_under_doubling_truncation() {
        for hv in [0.6, 0.7] {
            let c = constants(h(hv)).unwrap();
            let d = constants_with_truncation(h(hv), 2 * c.truncation_p).unwrap();
            assert!((c.q - d.q).abs() / c.q < 1e-6, "H={hv} q {} vs {}", c.q, d.q);
            assert!((c.r - d.r).abs() / c.r < 1e-6, "H={hv} r {} vs {}", c.r, d.r);
        }
    }

    #[test]
    fn continuity_in_h() {
        let grid = [0.55, 0.552, 0.6, 0.602, 0.68, 0.682];
        for pair in grid.chunks(2) {
            let a = constants(h(pair[0])).unwrap();
            let b = constants(h(pair[1])).unwrap();
            let scale = 0.03 * (a.q + a.r);
            assert!((a.q - b.q).abs() < scale, "{a:?} {b:?}");
            assert!((a.r - b.r).abs() < scale, "{a:?} {b:?}");
        }
    }
}
