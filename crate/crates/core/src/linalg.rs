//! Thin helpers over nalgebra's dynamic complex matrices.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::rng::complex_normal;

pub type CMatrix = DMatrix<Complex64>;

/// Inverse of a Hermitian positive (semi-)definite matrix.
///
/// Falls back to adding `eps·I` when the Cholesky factorisation fails; the
/// returned flag reports whether that regularisation was needed.
pub fn hermitian_inverse(a: &CMatrix, eps: f64) -> (CMatrix, bool) {
    if let Some(ch) = a.clone().cholesky() {
        return (ch.inverse(), false);
    }
    let n = a.nrows();
    let mut reg = a.clone();
    let mut bump = eps.max(f64::MIN_POSITIVE);
    loop {
        for i in 0..n {
            reg[(i, i)] = a[(i, i)] + bump;
        }
        if let Some(ch) = reg.clone().cholesky() {
            return (ch.inverse(), true);
        }
        bump *= 10.0;
    }
}

/// Ratio of largest to smallest singular value (∞ for rank-deficient input).
pub fn condition_number(a: &CMatrix) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let mut sv: Vec<f64> = a.clone().svd(false, false).singular_values.iter().cloned().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Haar-random `n×n` unitary (QR of a Ginibre matrix with the phase of R's diagonal removed).
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| complex_normal(rng, 1.0));
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// First `cols` columns of a random `rows×rows` unitary.
pub fn unitary_submatrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    random_unitary(rows, rng).columns(0, cols).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_for, Stream};

    #[test]
    fn unitary_is_unitary() {
        let mut rng = rng_for(3, Stream::Scratch);
        let u = random_unitary(6, &mut rng);
        let g = u.adjoint() * &u;
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_matrix_is_regularised() {
        let a = CMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        let (_, flagged) = hermitian_inverse(&a, 1e-12);
        assert!(flagged);
        assert!(condition_number(&a).is_infinite() || condition_number(&a) > 1e12);
    }
}
