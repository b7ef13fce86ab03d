//! Linear MMSE and ordered successive-interference-cancellation detection.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::framing::QPSK;
use crate::linalg::{hermitian_inverse, CMatrix};
use crate::signal::Samples;

/// Noise floor substituted for `n0 = 0`; its use is flagged.
pub const REGULARIZATION: f64 = 1e-12;
const TIE_TOLERANCE: f64 = 1e-9;

/// Nearest QPSK point; boundary values go to the positive side.
pub fn hard_decision(z: Complex64) -> Complex64 {
    let idx = 2 * (z.im < 0.0) as usize + (z.re < 0.0) as usize;
    QPSK[idx]
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub soft: Samples,
    pub hard: Samples,
    /// Decode order (identity for MMSE).
    pub order: Vec<usize>,
    /// Post-detection SINR of each transmit channel at its decode stage.
    pub sinr: Vec<f64>,
    pub regularized: bool,
}

impl DecodeResult {
    /// Stacks per-frame results in time; order and SINR are taken from the first.
    pub fn concat(parts: Vec<DecodeResult>) -> Result<DecodeResult> {
        let mut it = parts.into_iter();
        let mut out = it.next().ok_or_else(|| Error::InvalidConfig("nothing to concatenate".into()))?;
        for p in it {
            out.soft.data.extend(p.soft.data);
            out.hard.data.extend(p.hard.data);
            out.regularized |= p.regularized;
        }
        Ok(out)
    }
}

/// MMSE filters for the columns `set` of `h` (ascending), as rows of
/// `Wᴴ = (H_Sᴴ H_S + n0·I)⁻¹ H_Sᴴ`, which equals `[(H_S H_Sᴴ + n0·I)⁻¹ h_k]ᴴ`.
/// Also returns the post-detection SINR `1/(n0·[G⁻¹]_kk) − 1` per column.
#[derive(Debug, Clone)]
pub struct MmseFilters {
    pub set: Vec<usize>,
    pub rows: CMatrix,
    pub sinr: Vec<f64>,
    pub regularized: bool,
}

pub fn mmse_filters(h: &CMatrix, set: &[usize], n0: f64) -> Result<MmseFilters> {
    check_h(h)?;
    if !(n0 >= 0.0) {
        return Err(Error::InvalidConfig(format!("noise variance {n0}")));
    }
    let mut regularized = n0 < REGULARIZATION;
    let n0 = n0.max(REGULARIZATION);
    let hs = h.select_columns(set);
    let mut g = hs.adjoint() * &hs;
    for i in 0..set.len() {
        g[(i, i)] += n0;
    }
    let (g_inv, bumped) = hermitian_inverse(&g, REGULARIZATION);
    regularized |= bumped;
    let rows = &g_inv * hs.adjoint();
    let sinr = (0..set.len()).map(|i| 1.0 / (n0 * g_inv[(i, i)].re) - 1.0).collect();
    Ok(MmseFilters { set: set.to_vec(), rows, sinr, regularized })
}

fn check_h(h: &CMatrix) -> Result<()> {
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidConfig("channel estimate has non-finite entries".into()));
    }
    if h.ncols() == 0 || h.nrows() == 0 {
        return Err(Error::InvalidConfig("empty channel estimate".into()));
    }
    Ok(())
}

fn check_y(y: &Samples, h: &CMatrix) -> Result<()> {
    if y.width != h.nrows() {
        return Err(Error::ShapeMismatch { expected: format!("{} receive streams", h.nrows()), actual: y.width.to_string() });
    }
    Ok(())
}

fn dot_row(rows: &CMatrix, r: usize, y: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, v) in y.iter().enumerate() {
        acc += rows[(r, j)] * v;
    }
    acc
}

/// MMSE error covariance `n0·(HᴴH + n0·I)⁻¹ = (I + HᴴH/n0)⁻¹`.
pub fn mmse_error_covariance(h: &CMatrix, n0: f64) -> CMatrix {
    let n0 = n0.max(REGULARIZATION);
    let mut g = h.adjoint() * h;
    for i in 0..h.ncols() {
        g[(i, i)] += n0;
    }
    hermitian_inverse(&g, REGULARIZATION).0 * Complex64::new(n0, 0.0)
}

pub fn mmse_decode(y: &Samples, h: &CMatrix, n0: f64) -> Result<DecodeResult> {
    check_h(h)?;
    check_y(y, h)?;
    let n_t = h.ncols();
    let all: Vec<usize> = (0..n_t).collect();
    let f = mmse_filters(h, &all, n0)?;
    let mut soft = Samples::zeros(n_t, y.len());
    let mut hard = Samples::zeros(n_t, y.len());
    for t in 0..y.len() {
        let yt = y.row(t);
        for k in 0..n_t {
            let s = dot_row(&f.rows, k, yt);
            soft.row_mut(t)[k] = s;
            hard.row_mut(t)[k] = hard_decision(s);
        }
    }
    Ok(DecodeResult { soft, hard, order: all, sinr: f.sinr, regularized: f.regularized })
}

/// Greedy order: at each stage the remaining channel with the largest MMSE
/// SINR, ties to the lower index.
pub fn sic_order(h: &CMatrix, n0: f64) -> Result<Vec<usize>> {
    let mut remaining: Vec<usize> = (0..h.ncols()).collect();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let f = mmse_filters(h, &remaining, n0)?;
        let mut best = 0;
        for i in 1..remaining.len() {
            if f.sinr[i] > f.sinr[best] * (1.0 + TIE_TOLERANCE) && f.sinr[i] - f.sinr[best] > TIE_TOLERANCE {
                best = i;
            }
        }
        order.push(remaining.remove(best));
    }
    Ok(order)
}

/// Per-stage MMSE filters for a fixed decode order.
fn sic_stages(h: &CMatrix, n0: f64, order: &[usize]) -> Result<Vec<(usize, MmseFilters)>> {
    let mut seen = vec![false; h.ncols()];
    if order.len() != h.ncols() || order.iter().any(|&k| k >= h.ncols() || std::mem::replace(&mut seen[k], true)) {
        return Err(Error::InvalidConfig(format!("{order:?} is not a permutation of 0..{}", h.ncols())));
    }
    (0..order.len())
        .map(|i| {
            let mut set = order[i..].to_vec();
            set.sort_unstable();
            let f = mmse_filters(h, &set, n0)?;
            let r = set.iter().position(|&k| k == order[i]).unwrap();
            Ok((r, f))
        })
        .collect()
}

/// Post-detection SINR of each stage's channel, in decode order.
pub fn stage_sinrs(h: &CMatrix, n0: f64, order: &[usize]) -> Result<Vec<f64>> {
    Ok(sic_stages(h, n0, order)?.iter().map(|(r, f)| f.sinr[*r]).collect())
}

pub fn sic_decode(y: &Samples, h: &CMatrix, n0: f64, order: &[usize]) -> Result<DecodeResult> {
    check_h(h)?;
    check_y(y, h)?;
    let stages = sic_stages(h, n0, order)?;
    let n_t = h.ncols();
    let n_r = h.nrows();
    let mut soft = Samples::zeros(n_t, y.len());
    let mut hard = Samples::zeros(n_t, y.len());
    let mut residual = vec![Complex64::new(0.0, 0.0); n_r];
    for t in 0..y.len() {
        residual.copy_from_slice(y.row(t));
        for (&k, (r, f)) in order.iter().zip(&stages) {
            let s = dot_row(&f.rows, *r, &residual);
            let d = hard_decision(s);
            soft.row_mut(t)[k] = s;
            hard.row_mut(t)[k] = d;
            for (j, v) in residual.iter_mut().enumerate() {
                *v -= h[(j, k)] * d;
            }
        }
    }
    let mut sinr = vec![0.0; n_t];
    for (&k, (r, f)) in order.iter().zip(&stages) {
        sinr[k] = f.sinr[*r];
    }
    let regularized = stages.iter().any(|(_, f)| f.regularized);
    Ok(DecodeResult { soft, hard, order: order.to_vec(), sinr, regularized })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitary_submatrix;
    use crate::rng::{complex_normal, rng_for, Stream};
    use rand::Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn real_matrix(rows: usize, cols: usize, v: &[f64]) -> CMatrix {
        CMatrix::from_row_slice(rows, cols, &v.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>())
    }

    #[test]
    fn decisions() {
        let z = c(0.9, 0.8) * FRAC_1_SQRT_2;
        assert_eq!(hard_decision(z), c(FRAC_1_SQRT_2, FRAC_1_SQRT_2));
        for q in QPSK {
            assert_eq!(hard_decision(q), q);
        }
        assert_eq!(hard_decision(c(0.0, 0.0)), QPSK[0]);
        assert_eq!(hard_decision(c(-0.1, -3.0)), QPSK[3]);
        assert_eq!(hard_decision(c(5.0, -0.1)), QPSK[2]);
    }

    #[test]
    fn mmse_scalar_example() {
        let h = real_matrix(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let y = Samples { width: 2, data: vec![c(2.0, 0.0), c(1.0, 0.0)] };
        let d = mmse_decode(&y, &h, 0.1).unwrap();
        assert!((d.soft.data[0].re - 4.0 / 4.1).abs() < 1e-12);
        assert!((d.soft.data[1].re - 1.0 / 1.1).abs() < 1e-12);
        assert!(!d.regularized);
        assert_eq!(sic_order(&h, 0.1).unwrap(), vec![0, 1]);
    }

    #[test]
    fn sinr_matches_direct_formula() {
        // β = hᴴ (H Hᴴ + n0 I)⁻¹ h and SINR = β / (1 − β)
        let mut rng = rng_for(21, Stream::Scratch);
        let h = CMatrix::from_fn(5, 3, |_, _| complex_normal(&mut rng, 1.0));
        let n0 = 0.3;
        let f = mmse_filters(&h, &[0, 1, 2], n0).unwrap();
        let mut r = &h * h.adjoint();
        for i in 0..5 {
            r[(i, i)] += n0;
        }
        let r_inv = r.try_inverse().unwrap();
        for k in 0..3 {
            let hk = h.column(k);
            let beta = (hk.adjoint() * &r_inv * hk)[(0, 0)].re;
            assert!((f.sinr[k] / (beta / (1.0 - beta)) - 1.0).abs() < 1e-9);
            let w = &r_inv * hk;
            for j in 0..5 {
                assert!((f.rows[(k, j)] - w[j].conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_and_ties() {
        let h = CMatrix::identity(4, 4);
        assert_eq!(sic_order(&h, 0.01).unwrap(), vec![0, 1, 2, 3]);
        let y = Samples { width: 4, data: QPSK.to_vec() };
        let d = mmse_decode(&y, &h, 0.0).unwrap();
        assert_eq!(d.hard, y);
        assert!(d.regularized);
        let s = sic_decode(&y, &h, 0.0, &[0, 1, 2, 3]).unwrap();
        assert_eq!(s.hard, d.hard);
    }

    #[test]
    fn sic_recovers_near_collinear_channel() {
        let h = real_matrix(2, 2, &[1.0, 0.9, 0.0, 1.0]);
        let mut rng = rng_for(4, Stream::Scratch);
        let n = 2000;
        let s = Samples { width: 2, data: (0..2 * n).map(|_| QPSK[rng.random_range(0..4)]).collect() };
        let mut y = Samples::zeros(2, n);
        for t in 0..n {
            let x = s.row(t);
            y.row_mut(t)[0] = x[0] + 0.9 * x[1];
            y.row_mut(t)[1] = x[1];
        }
        let d = sic_decode(&y, &h, 0.0, &[1, 0]).unwrap();
        assert_eq!(d.hard, s);
        for (a, b) in d.soft.data.iter().zip(&s.data) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn sic_first_stage_equals_mmse_bit_exactly() {
        let mut rng = rng_for(8, Stream::Scratch);
        for _ in 0..20 {
            let h = CMatrix::from_fn(6, 4, |_, _| complex_normal(&mut rng, 1.0));
            let y = Samples { width: 6, data: (0..600).map(|_| complex_normal(&mut rng, 1.0)).collect() };
            let n0 = 0.05;
            let order = sic_order(&h, n0).unwrap();
            let m = mmse_decode(&y, &h, n0).unwrap();
            let s = sic_decode(&y, &h, n0, &order).unwrap();
            let k = order[0];
            assert_eq!(s.soft.column(k), m.soft.column(k));
        }
    }

    #[test]
    fn orthogonal_columns_give_identical_decisions() {
        let mut rng = rng_for(9, Stream::Unitary);
        let h = unitary_submatrix(6, 4, &mut rng) * c(0.7, 0.0);
        let y = Samples { width: 6, data: (0..6 * 500).map(|_| complex_normal(&mut rng, 0.5)).collect() };
        let order = sic_order(&h, 0.1).unwrap();
        let m = mmse_decode(&y, &h, 0.1).unwrap();
        let s = sic_decode(&y, &h, 0.1, &order).unwrap();
        assert_eq!(m.hard, s.hard);
    }

    #[test]
    fn greedy_order_is_close_to_exhaustive() {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut rng = rng_for(10, Stream::Scratch);
        let n0 = 0.1;
        let mut matches = 0;
        for _ in 0..1000 {
            let h = CMatrix::from_fn(4, 3, |_, _| complex_normal(&mut rng, 1.0));
            let min_sinr = |o: &[usize]| stage_sinrs(&h, n0, o).unwrap().into_iter().fold(f64::INFINITY, f64::min);
            let best = perms.iter().map(|p| min_sinr(p)).fold(0.0, f64::max);
            let greedy = min_sinr(&sic_order(&h, n0).unwrap());
            assert!(10.0 * (best / greedy).log10() <= 1.0);
            if greedy >= best * (1.0 - 1e-9) {
                matches += 1;
            }
        }
        assert!(matches >= 950, "{matches}");
    }

    #[test]
    fn bad_inputs() {
        let h = CMatrix::identity(2, 2);
        let y = Samples::zeros(3, 1);
        assert!(mmse_decode(&y, &h, 0.1).is_err());
        assert!(sic_decode(&Samples::zeros(2, 1), &h, 0.1, &[0, 0]).is_err());
        assert!(mmse_filters(&h, &[0, 1], -1.0).is_err());
        let mut bad = h.clone();
        bad[(0, 0)] = c(f64::NAN, 0.0);
        assert!(mmse_decode(&Samples::zeros(2, 1), &bad, 0.1).is_err());
    }

    #[test]
    fn appending_rows_never_hurts() {
        let mut rng = rng_for(11, Stream::Scratch);
        for _ in 0..50 {
            let big = CMatrix::from_fn(6, 4, |_, _| complex_normal(&mut rng, 1.0));
            let small = big.rows(0, 4).into_owned();
            let a = mmse_error_covariance(&small, 0.2);
            let b = mmse_error_covariance(&big, 0.2);
            for k in 0..4 {
                assert!(b[(k, k)].re <= a[(k, k)].re + 1e-12);
            }
        }
    }
}
