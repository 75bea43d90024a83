//! Complex dense linear-algebra helpers shared by the solver and the
//! beamforming modules.

use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64 as C64;

use crate::{Error, Result};

pub type CVec = DVector<C64>;
pub type CMat = DMatrix<C64>;

/// Relative threshold above which a supposedly real quantity is treated as an
/// indexing error rather than round-off.
pub const IMAG_RESIDUE_TOL: f64 = 1e-9;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Unit-modulus complex number with the given phase.
pub fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// `(A + Aᴴ)/2`.
pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Drops the imaginary part of a quantity that must be real, refusing when the
/// residue exceeds [`IMAG_RESIDUE_TOL`] relative to `scale`.
pub fn checked_real(value: C64, scale: f64, what: &str) -> Result<f64> {
    let scale = scale.abs().max(value.re.abs()).max(f64::MIN_POSITIVE);
    if value.im.abs() > IMAG_RESIDUE_TOL * scale {
        return Err(Error::InvariantViolation(format!(
            "{what} has imaginary residue {:.3e} (scale {:.3e})",
            value.im, scale
        )));
    }
    Ok(value.re)
}

/// Largest absolute deviation of `a` from Hermitian symmetry.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues of a Hermitian matrix in descending order, with the matching
/// eigenvectors as columns.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let eig = nalgebra::SymmetricEigen::new(hermitize(a));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(a.nrows(), order.len(), |r, k| {
        eig.eigenvectors[(r, order[k])]
    });
    (values, vectors)
}

/// Outer product `u vᴴ`.
pub fn outer(u: &CVec, v: &CVec) -> CMat {
    u * v.adjoint()
}

pub fn real_diag(values: &[f64]) -> CMat {
    CMat::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&x| C64::new(x, 0.0)),
    ))
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    DMatrix::zeros(rows, cols)
}

/// Cholesky factorization of a Hermitian matrix that refuses indefinite input.
///
/// nalgebra's complex factorization takes complex square roots of negative
/// pivots, so positivity has to be checked on the factor's diagonal.
pub fn hermitian_cholesky(a: CMat) -> Option<nalgebra::Cholesky<C64, nalgebra::Dyn>> {
    let chol = nalgebra::Cholesky::new(a)?;
    let l = chol.l_dirty();
    for i in 0..l.nrows() {
        let p = l[(i, i)];
        if !(p.re > 0.0) || p.im.abs() > 1e-8 * p.re {
            return None;
        }
    }
    Some(chol)
}
