//! Dense helpers on top of nalgebra: numerical rank, pseudo-inverses and
//! orthogonal projections with a relative singular-value cutoff.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

/// Default relative cutoff for numerical rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Singular values in descending order (empty for degenerate shapes).
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    match sv.first() {
        Some(&top) if top > 0.0 => sv.iter().filter(|&&s| s > rel_tol * top).count(),
        _ => 0,
    }
}

/// sigma_min / sigma_max of a square matrix; 0 for singular or empty input.
pub fn reciprocal_condition(m: &DMatrix<f64>) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    }
}

/// Orthonormal basis of the column space, truncated at the relative cutoff.
pub fn range_basis(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| top > 0.0 && s > rel_tol * top)
        .map(|(i, _)| i)
        .collect();
    u.select_columns(keep.iter())
}

/// Orthonormal basis of the row space (right singular vectors kept by the cutoff).
pub fn row_space_basis(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    range_basis(&m.transpose(), rel_tol)
}

/// Euclidean norm of `v - P v` where `P` projects onto the column space of `m`.
pub fn projection_residual(m: &DMatrix<f64>, v: &DVector<f64>, rel_tol: f64) -> f64 {
    let q = range_basis(m, rel_tol);
    if q.ncols() == 0 {
        return v.norm();
    }
    let coeffs = q.transpose() * v;
    (v - q * coeffs).norm()
}

/// Moore-Penrose pseudo-inverse with a relative singular-value cutoff.
pub fn pinv(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if top > 0.0 && s > rel_tol * top {
            out += (v_t.row(k).transpose() / s) * u.column(k).transpose();
        }
    }
    out
}

/// Minimum-norm least-squares solution of `m x = b`.
pub fn lstsq(m: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    pinv(m, rel_tol) * b
}

/// Columns of `m` at the given indices, in order.
pub fn columns(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    m.select_columns(idx.iter())
}

/// Horizontal concatenation `[a | b]`.
pub fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows(), "row counts differ");
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Whether two matrices with equal row counts span the same column space.
pub fn same_image(a: &DMatrix<f64>, b: &DMatrix<f64>, rel_tol: f64) -> bool {
    let ra = rank(a, rel_tol);
    let rb = rank(b, rel_tol);
    ra == rb && rank(&hcat(a, b), rel_tol) == ra
}
