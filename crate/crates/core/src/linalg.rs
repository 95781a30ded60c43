//! Small dense linear-algebra helpers shared by the modules.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;

/// Spectral (operator 2-) norm.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Spectral norm of a complex matrix.
pub fn op_norm_c(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Thin QR with the convention `R_ii >= 0`.
pub fn qr_positive(m: DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = m.qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..r.nrows().min(r.ncols()) {
        if r[(i, i)] < 0.0 {
            r.row_mut(i).neg_mut();
            q.column_mut(i).neg_mut();
        }
    }
    (q, r)
}

/// Orthonormal basis (columns) of the column space of a complex matrix.
pub fn orthonormalize_c(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    m.qr().q()
}

/// Canonical symplectic form `J = [[0, -I], [I, 0]]` of size `2n`.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = -1.0;
        j[(n + i, i)] = 1.0;
    }
    j
}

/// Largest absolute deviation from symmetry.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// `[a, b] = ab - ba`.
pub fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let top = sv.max();
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}
