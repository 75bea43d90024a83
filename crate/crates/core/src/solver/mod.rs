//! Dense convex kernels for the two subproblem families.
//!
//! - [`psd`]: maximize tr(AΦ) over unit-diagonal Hermitian PSD Φ with an
//!   optional concave log-sum rate floor, or maximize the log-sum itself.
//! - [`gp`]: geometric programs in log-domain convex form.
//!
//! Both are barrier methods with damped Newton steps and dense
//! factorizations; problem sizes here stay below a few hundred variables.

pub mod gp;
pub mod psd;

use nalgebra::{DMatrix, DVector};

/// Solves `H x = b` for a symmetric positive (semi)definite `H`, adding a
/// growing ridge when the plain Cholesky factorization fails.
pub(crate) fn spd_solve(h: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        return Some(ch.solve(b));
    }
    let scale = h
        .diagonal()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let mut ridge = 1e-14 * scale;
    for _ in 0..12 {
        let mut reg = h.clone();
        for i in 0..reg.nrows() {
            reg[(i, i)] += ridge;
        }
        if let Some(ch) = reg.cholesky() {
            return Some(ch.solve(b));
        }
        ridge *= 100.0;
    }
    None
}
