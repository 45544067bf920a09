//! Path functionals: reference integrals on the fine grid, coarse Riemann
//! sums, the error process `M^n` and the weighted power-variation statistics.
//!
//! A coarse grid of `n` steps is addressed through the fine grid of the path:
//! `n` must divide the number of fine steps `N`, and coarse node `k` is fine
//! node `k * N / n`. One path therefore serves every `n` dividing `N`.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FbmPath, HurstIndex, ProcessPair, Regime};

/// How the reference integral `∫ u dB^j` is discretized on the fine grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceScheme {
    /// `Σ u_l δB_l`. Converges to the Itô integral at `H = 1/2`.
    LeftPoint,
    /// `Σ u_l δB^j_l + ½ Σ_e P^{(·,e)}_l δB^e_l δB^j_l`. Its bias is
    /// `o(step^{2H})` per step instead of `O(step^{2H})`.
    SecondOrder,
}

impl ReferenceScheme {
    /// Itô reference at `H = 1/2`, Young reference otherwise.
    pub fn for_hurst(h: HurstIndex) -> Self {
        if h.is_brownian() {
            ReferenceScheme::LeftPoint
        } else {
            ReferenceScheme::SecondOrder
        }
    }
}

/// Values of `M^n_t` and `M^n_t - ½∫_0^t P ds` for one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub h: HurstIndex,
    pub n: usize,
    pub t: f64,
    /// `m x d`
    pub m_n: Array2<f64>,
    /// `m x d`
    pub corrected: Array2<f64>,
    pub replication: u64,
}

/// Fine steps per coarse step for a coarse grid of `n` steps.
pub fn coarse_stride(path: &FbmPath, n: usize) -> Result<usize> {
    let fine = path.grid.fine_steps();
    if n == 0 || fine % n != 0 {
        return Err(Error::InvalidGrid(format!(
            "n={n} does not divide the fine grid of {fine} steps"
        )));
    }
    Ok(fine / n)
}

fn check_component(path: &FbmPath, j: usize) -> Result<()> {
    if j >= path.d_dims() {
        return Err(Error::InvalidInput(format!(
            "component {j} out of range for a {}-dimensional path",
            path.d_dims()
        )));
    }
    Ok(())
}

/// Fine index of `t`, required to be a node of the coarse grid of `n` steps.
fn coarse_node(path: &FbmPath, n: usize, t: f64) -> Result<(usize, usize)> {
    let stride = coarse_stride(path, n)?;
    let i = path.grid.fine_index(t)?;
    if i % stride != 0 {
        return Err(Error::InvalidGrid(format!("t={t} is not a node of the grid with n={n}")));
    }
    Ok((i, stride))
}

/// Number of complete coarse blocks in `[0, t]`.
fn full_blocks(path: &FbmPath, n: usize, t: f64) -> Result<(usize, usize)> {
    let stride = coarse_stride(path, n)?;
    let i = path.grid.fine_index(t)?;
    Ok((i / stride, stride))
}

/// `n^{2H-1}`, the error-process prefactor.
fn prefactor(h: HurstIndex, n: usize) -> f64 {
    (n as f64).powf(h.two_h() - 1.0)
}

/// Reference value of `∫_0^t u dB^j` for every component of `u`.
///
/// `t` may be any fine node.
pub fn fine_integral(
    pair: &ProcessPair,
    path: &FbmPath,
    j: usize,
    t: f64,
    scheme: ReferenceScheme,
) -> Result<Vec<f64>> {
    pair.check_conforms(path)?;
    check_component(path, j)?;
    let end = path.grid.fine_index(t)?;
    let b = path.values.view();
    let bj = b.row(j);
    let d = path.d_dims();
    let mut out = vec![0.0; pair.m_dims()];
    for (i, acc) in out.iter_mut().enumerate() {
        let u = pair.u.row(i);
        let mut sum = 0.0;
        for l in 0..end {
            let dbj = bj[l + 1] - bj[l];
            let mut integrand = u[l];
            if scheme == ReferenceScheme::SecondOrder {
                let mut second = 0.0;
                for e in 0..d {
                    second += pair.p[[i, e, l]] * (b[[e, l + 1]] - b[[e, l]]);
                }
                integrand += 0.5 * second;
            }
            sum += integrand * dbj;
        }
        *acc = sum;
    }
    Ok(out)
}

/// Coarse left-point sum `Σ_k u_{k/n} (B^j_{(k+1)/n ∧ t} - B^j_{k/n})`.
///
/// `t` may be any fine node; a trailing partial block contributes its partial
/// increment.
pub fn riemann_sum(pair: &ProcessPair, path: &FbmPath, j: usize, t: f64, n: usize) -> Result<Vec<f64>> {
    pair.check_conforms(path)?;
    check_component(path, j)?;
    let stride = coarse_stride(path, n)?;
    let end = path.grid.fine_index(t)?;
    let bj = path.component(j);
    let mut out = vec![0.0; pair.m_dims()];
    for (i, acc) in out.iter_mut().enumerate() {
        let u = pair.u.row(i);
        let mut sum = 0.0;
        let mut k = 0;
        while k < end {
            let next = (k + stride).min(end);
            sum += u[k] * (bj[next] - bj[k]);
            k += stride;
        }
        *acc = sum;
    }
    Ok(out)
}

/// Trapezoid rule for `∫_0^t P^{(i,j)} ds` on the fine grid, `m x d`.
pub fn weight_integral(pair: &ProcessPair, path: &FbmPath, t: f64) -> Result<Array2<f64>> {
    pair.check_conforms(path)?;
    let end = path.grid.fine_index(t)?;
    let dt = path.grid.fine_step();
    let (m, d) = (pair.m_dims(), pair.d_dims());
    Ok(Array2::from_shape_fn((m, d), |(i, j)| {
        let p = pair.p.slice(ndarray::s![i, j, ..]);
        (0..end).map(|l| 0.5 * (p[l] + p[l + 1])).sum::<f64>() * dt
    }))
}

/// `M^n_t = n^{2H-1} (reference - riemann_sum)` for all `(i, j)`.
pub fn error_process(
    pair: &ProcessPair,
    path: &FbmPath,
    n: usize,
    t: f64,
    scheme: ReferenceScheme,
    replication: u64,
) -> Result<ErrorRecord> {
    pair.check_conforms(path)?;
    coarse_node(path, n, t)?;
    let (m, d) = (pair.m_dims(), pair.d_dims());
    let scale = prefactor(path.hurst, n);
    let mut m_n = Array2::zeros((m, d));
    for j in 0..d {
        let fine = fine_integral(pair, path, j, t, scheme)?;
        let coarse = riemann_sum(pair, path, j, t, n)?;
        for i in 0..m {
            m_n[[i, j]] = scale * (fine[i] - coarse[i]);
        }
    }
    let corrected = &m_n - &(0.5 * weight_integral(pair, path, t)?);
    Ok(ErrorRecord { h: path.hurst, n, t, m_n, corrected, replication })
}

/// `½((B^j_{(k+1)/n} - B^j_{k/n})^2 - (T/n)^{2H})`, the Skorohod integral of
/// `(B^j - B^j_{k/n}) 1_{[k/n, (k+1)/n]}` against `B^j`.
pub fn skorohod_diag_increment(path: &FbmPath, j: usize, k: usize, n: usize) -> Result<f64> {
    check_component(path, j)?;
    let stride = coarse_stride(path, n)?;
    if k >= n {
        return Err(Error::InvalidInput(format!("block {k} out of range for n={n}")));
    }
    let bj = path.component(j);
    let db = bj[(k + 1) * stride] - bj[k * stride];
    let var = (path.grid.horizon / n as f64).powf(path.hurst.two_h());
    Ok(0.5 * (db * db - var))
}

/// `∫_a^c (X_s - X_anchor) dX'_s` on fine nodes `a..c` by the trapezoid rule,
/// which is exact when `X = X'`.
fn young_block(x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>, a: usize, c: usize, anchor: usize) -> f64 {
    let x0 = x[anchor];
    (a..c).map(|l| (0.5 * (x[l] + x[l + 1]) - x0) * (y[l + 1] - y[l])).sum()
}

/// `Z_n(t)`: `n Σ_{k < ⌊nt⌋}` of the Skorohod integrals of
/// `(B^j - B^j_{k/n}) 1_{block k}` against `B^i`.
///
/// For `i = j` the closed form is used; for `i ≠ j` the cross Young integral
/// on the fine grid (no trace term).
pub fn rosenblatt_approx(path: &FbmPath, i: usize, j: usize, t: f64, n: usize) -> Result<f64> {
    if path.hurst.regime() != Regime::High {
        return Err(Error::Regime(format!(
            "the Rosenblatt approximation needs H > 3/4, got H={}",
            path.hurst
        )));
    }
    check_component(path, i)?;
    check_component(path, j)?;
    let (blocks, stride) = full_blocks(path, n, t)?;
    let mut sum = 0.0;
    if i == j {
        for k in 0..blocks {
            sum += skorohod_diag_increment(path, j, k, n)?;
        }
    } else {
        let (bi, bj) = (path.component(i), path.component(j));
        for k in 0..blocks {
            sum += young_block(bj, bi, k * stride, (k + 1) * stride, k * stride);
        }
    }
    Ok(n as f64 * sum)
}

/// `n Σ_{k < ⌊nt⌋} Σ_e P^{(i,e)}_{k/n} δ^j((B^e - B^e_{k/n}) 1_{block k})`,
/// the Riemann approximation of `∫ P^{(i,·)} dZ^{(·,j)}`.
///
/// With `P = I` this is [`rosenblatt_approx`]`(path, j, i, ..)` for the row `i`.
pub fn weighted_rosenblatt(
    pair: &ProcessPair,
    path: &FbmPath,
    i: usize,
    j: usize,
    t: f64,
    n: usize,
) -> Result<f64> {
    if path.hurst.regime() != Regime::High {
        return Err(Error::Regime(format!(
            "the Rosenblatt approximation needs H > 3/4, got H={}",
            path.hurst
        )));
    }
    pair.check_conforms(path)?;
    check_component(path, j)?;
    if i >= pair.m_dims() {
        return Err(Error::InvalidInput(format!("output component {i} out of range")));
    }
    let (blocks, stride) = full_blocks(path, n, t)?;
    let bj = path.component(j);
    let mut sum = 0.0;
    for e in 0..path.d_dims() {
        let be = path.component(e);
        for k in 0..blocks {
            let a = k * stride;
            let weight = pair.p[[i, e, a]];
            if weight == 0.0 {
                continue;
            }
            let block = if e == j {
                skorohod_diag_increment(path, j, k, n)?
            } else {
                young_block(be, bj, a, a + stride, a)
            };
            sum += weight * block;
        }
    }
    Ok(n as f64 * sum)
}

/// `n^{2H-1} Σ_{k < ⌊nt⌋} x_{k/n} (ΔB^j_k)^2`; `x` lives on the fine grid.
pub fn weighted_quad_variation(
    x: ArrayView1<'_, f64>,
    path: &FbmPath,
    j: usize,
    t: f64,
    n: usize,
) -> Result<f64> {
    check_component(path, j)?;
    check_weight(x, path)?;
    let (blocks, stride) = full_blocks(path, n, t)?;
    let bj = path.component(j);
    let sum: f64 = (0..blocks)
        .map(|k| {
            let db = bj[(k + 1) * stride] - bj[k * stride];
            x[k * stride] * db * db
        })
        .sum();
    Ok(prefactor(path.hurst, n) * sum)
}

/// `Σ_{k < ⌊nt⌋} x_{k/n} δ((B^e - B^e_{(k+1)/n}) 1_{block k})` against `B^j`,
/// unnormalized.
pub fn weighted_levy_area(
    x: ArrayView1<'_, f64>,
    path: &FbmPath,
    j: usize,
    e: usize,
    t: f64,
    n: usize,
) -> Result<f64> {
    check_component(path, j)?;
    check_component(path, e)?;
    check_weight(x, path)?;
    let (blocks, stride) = full_blocks(path, n, t)?;
    let mut sum = 0.0;
    if e == j {
        // Anchored at the right end the block integral is the negated
        // left-anchored one.
        for k in 0..blocks {
            sum -= x[k * stride] * skorohod_diag_increment(path, j, k, n)?;
        }
    } else {
        let (be, bj) = (path.component(e), path.component(j));
        for k in 0..blocks {
            let (a, c) = (k * stride, (k + 1) * stride);
            sum += x[a] * young_block(be, bj, a, c, c);
        }
    }
    Ok(sum)
}

/// `Σ_{k < ⌊nt⌋} b_{k/n} ∫_{k/n}^{(k+1)/n} (s - k/n) dB^i_s`, unnormalized.
///
/// Each block integral is `(c-a) B_c - ∫_a^c B ds`, the time integral by the
/// fine trapezoid rule.
pub fn weighted_drift_sum(
    b: ArrayView1<'_, f64>,
    path: &FbmPath,
    i: usize,
    t: f64,
    n: usize,
) -> Result<f64> {
    check_component(path, i)?;
    check_weight(b, path)?;
    let (blocks, stride) = full_blocks(path, n, t)?;
    let bi = path.component(i);
    let dt = path.grid.fine_step();
    let width = stride as f64 * dt;
    let mut sum = 0.0;
    for k in 0..blocks {
        let (a, c) = (k * stride, (k + 1) * stride);
        let area: f64 = (a..c).map(|l| 0.5 * (bi[l] + bi[l + 1])).sum::<f64>() * dt;
        sum += b[a] * (width * bi[c] - area);
    }
    Ok(sum)
}

fn check_weight(x: ArrayView1<'_, f64>, path: &FbmPath) -> Result<()> {
    if x.len() != path.fine_len() {
        return Err(Error::InvalidInput(format!(
            "weight has {} samples, path has {}",
            x.len(),
            path.fine_len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{generate, GeneratorSpec};
    use crate::model::SimGrid;
    use ndarray::{Array1, Array3};

    fn h(x: f64) -> HurstIndex {
        HurstIndex::new(x).unwrap()
    }

    fn path(hv: f64, n: usize, m: usize, d: usize, rep: u64) -> FbmPath {
        let grid = SimGrid::new(1.0, n, m, d).unwrap();
        generate(h(hv), grid, GeneratorSpec::new(7, rep)).unwrap()
    }

    fn constant_pair(path: &FbmPath, c: f64) -> ProcessPair {
        let len = path.fine_len();
        ProcessPair {
            u: Array2::from_elem((1, len), c),
            p: Array3::zeros((1, path.d_dims(), len)),
            label: "const".into(),
        }
    }

    fn identity_pair(path: &FbmPath) -> ProcessPair {
        let len = path.fine_len();
        let d = path.d_dims();
        let mut p = Array3::zeros((d, d, len));
        for i in 0..d {
            p.slice_mut(ndarray::s![i, i, ..]).fill(1.0);
        }
        ProcessPair { u: path.values.clone(), p, label: "id".into() }
    }

    #[test]
    fn constant_integrand_telescopes() {
        let p = path(0.7, 16, 8, 2, 0);
        let pair = constant_pair(&p, 2.5);
        for scheme in [ReferenceScheme::LeftPoint, ReferenceScheme::SecondOrder] {
            let f = fine_integral(&pair, &p, 1, 1.0, scheme).unwrap();
            assert!((f[0] - 2.5 * p.values[[1, 128]]).abs() < 1e-12);
        }
        for n in [2, 4, 16, 128] {
            let r = riemann_sum(&pair, &p, 0, 1.0, n).unwrap();
            assert!((r[0] - 2.5 * p.values[[0, 128]]).abs() < 1e-12);
            let rec = error_process(&pair, &p, n, 1.0, ReferenceScheme::SecondOrder, 0).unwrap();
            assert!(rec.m_n.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn coarse_equal_to_fine_matches_left_point() {
        let p = path(0.6, 64, 1, 1, 3);
        let pair = identity_pair(&p);
        let f = fine_integral(&pair, &p, 0, 1.0, ReferenceScheme::LeftPoint).unwrap();
        let r = riemann_sum(&pair, &p, 0, 1.0, 64).unwrap();
        assert_eq!(f, r);
        let rec = error_process(&pair, &p, 64, 1.0, ReferenceScheme::LeftPoint, 0).unwrap();
        assert!(rec.m_n.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn second_order_reference_is_exact_for_b() {
        let p = path(0.8, 32, 16, 1, 1);
        let pair = identity_pair(&p);
        let f = fine_integral(&pair, &p, 0, 1.0, ReferenceScheme::SecondOrder).unwrap();
        let b1 = p.values[[0, 512]];
        assert!((f[0] - 0.5 * b1 * b1).abs() < 1e-12);
    }

    #[test]
    fn corrected_is_m_n_minus_half_weight_integral() {
        let p = path(0.7, 16, 4, 2, 2);
        let pair = identity_pair(&p);
        let rec = error_process(&pair, &p, 8, 0.5, ReferenceScheme::SecondOrder, 9).unwrap();
        let w = weight_integral(&pair, &p, 0.5).unwrap();
        for ((a, b), c) in rec.m_n.iter().zip(rec.corrected.iter()).zip(w.iter()) {
            assert_eq!(*b, a - 0.5 * c);
        }
        assert!((w[[0, 0]] - 0.5).abs() < 1e-12);
        assert_eq!(w[[0, 1]], 0.0);
    }

    #[test]
    fn error_process_for_b_is_centred_quadratic_variation() {
        let p = path(0.7, 32, 8, 1, 4);
        let pair = identity_pair(&p);
        let n = 32;
        let rec = error_process(&pair, &p, n, 1.0, ReferenceScheme::SecondOrder, 0).unwrap();
        let mut zsum = 0.0;
        for k in 0..n {
            zsum += skorohod_diag_increment(&p, 0, k, n).unwrap();
        }
        let expected = prefactor(p.hurst, n) * zsum + 0.5;
        assert!((rec.m_n[[0, 0]] - expected).abs() < 1e-12);
    }

    #[test]
    fn partial_last_increment() {
        let p = path(0.65, 8, 8, 1, 5);
        let pair = identity_pair(&p);
        // t = 3/8 + 3 fine steps: three full blocks and a partial one.
        let t = p.grid.fine_time(27);
        let r = riemann_sum(&pair, &p, 0, t, 8).unwrap()[0];
        let b = p.component(0);
        let mut expected = 0.0;
        for k in 0..3 {
            expected += b[8 * k] * (b[8 * k + 8] - b[8 * k]);
        }
        expected += b[24] * (b[27] - b[24]);
        assert!((r - expected).abs() < 1e-14);
        assert!(error_process(&pair, &p, 8, t, ReferenceScheme::SecondOrder, 0).is_err());
    }

    #[test]
    fn rejects_bad_grids() {
        let p = path(0.6, 8, 4, 1, 0);
        let pair = constant_pair(&p, 1.0);
        assert!(riemann_sum(&pair, &p, 0, 1.0, 5).is_err());
        assert!(riemann_sum(&pair, &p, 1, 1.0, 4).is_err());
        assert!(fine_integral(&pair, &p, 0, 0.01, ReferenceScheme::LeftPoint).is_err());
        assert!(rosenblatt_approx(&p, 0, 0, 1.0, 8).is_err());
    }

    #[test]
    fn diag_increment_single_block() {
        let p = path(0.8, 4, 4, 1, 6);
        let b1 = p.values[[0, 16]];
        let v = skorohod_diag_increment(&p, 0, 0, 1).unwrap();
        assert!((v - 0.5 * (b1 * b1 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn cross_block_against_itself_matches_closed_form() {
        let p = path(0.8, 8, 16, 1, 8);
        let b = p.component(0);
        for k in 0..8 {
            let y = young_block(b, b, 16 * k, 16 * k + 16, 16 * k);
            let var = (1.0f64 / 8.0).powf(1.6);
            let s = skorohod_diag_increment(&p, 0, k, 8).unwrap();
            assert!((y - 0.5 * var - s).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_weights_give_zero() {
        let p = path(0.6, 16, 4, 2, 0);
        let zero = Array1::zeros(p.fine_len());
        assert_eq!(weighted_levy_area(zero.view(), &p, 0, 1, 1.0, 16).unwrap(), 0.0);
        assert_eq!(weighted_levy_area(zero.view(), &p, 0, 0, 1.0, 16).unwrap(), 0.0);
        assert_eq!(weighted_drift_sum(zero.view(), &p, 1, 1.0, 16).unwrap(), 0.0);
        assert_eq!(weighted_quad_variation(zero.view(), &p, 1, 1.0, 16).unwrap(), 0.0);
    }

    #[test]
    fn drift_block_of_linear_path() {
        let grid = SimGrid::new(1.0, 4, 8, 1).unwrap();
        let len = grid.fine_steps() + 1;
        let values = Array2::from_shape_fn((1, len), |(_, i)| grid.fine_time(i));
        let p = FbmPath { values, seed: 0, stream: 0, grid, hurst: h(0.7) };
        let one = Array1::ones(len);
        // ∫_a^c (s-a) ds = (c-a)^2 / 2 per block.
        let v = weighted_drift_sum(one.view(), &p, 0, 1.0, 4).unwrap();
        assert!((v - 4.0 * 0.5 / 16.0).abs() < 1e-14);
    }
}
