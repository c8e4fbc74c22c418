//! Algebraic identifiability of the causal coefficient from the total-effect
//! matrix `C`: per-coordinate identifiability through the null space of `C`,
//! and the rank/image conditions on parent and candidate column sets.

use alloc::vec::Vec;
use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::binomial;
use crate::linalg::{self, columns, DEFAULT_RANK_TOL};
use crate::model::{MomentSystem, Scm};

/// Default number of candidate sets the A2 sweep may enumerate without `force`.
pub const A2_SUBSET_BUDGET: u128 = 5_000_000;

/// Coordinates `j` for which the `j`-th coordinate of `Null(C)` is `{0}`.
///
/// Row `j` of the null-space projector `Id - C^+ C` must vanish; its norm is
/// compared against `rank_tol`.
pub fn partial_identifiability(c: &DMatrix<f64>, rank_tol: f64) -> Vec<bool> {
    let d = c.ncols();
    let row_basis = linalg::row_space_basis(c, rank_tol);
    (0..d)
        .map(|j| {
            let mut null_row = -(&row_basis * row_basis.row(j).transpose());
            null_row[j] += 1.0;
            null_row.norm() <= rank_tol
        })
        .collect()
}

/// Moore-Penrose solution `Cov(I,X)^+ Cov(I,Y)` with the identifiability mask of
/// `Cov(I,X)`. Entries outside the mask carry no guarantee.
pub fn identified_coordinate_estimates(moments: &MomentSystem, rank_tol: f64) -> (DVector<f64>, Vec<bool>) {
    let estimate = linalg::lstsq(&moments.cov_ix, &moments.cov_iy, rank_tol);
    let mask = partial_identifiability(&moments.cov_ix, rank_tol);
    (estimate, mask)
}

/// Full column rank of the parent columns.
pub fn check_a1(c: &DMatrix<f64>, pa: &[usize], rank_tol: f64) -> bool {
    !pa.is_empty() && linalg::rank(&columns(c, pa), rank_tol) == pa.len()
}

/// Rank of the parent columns, reported alongside the A1 verdict.
pub fn parent_rank(c: &DMatrix<f64>, pa: &[usize], rank_tol: f64) -> usize {
    linalg::rank(&columns(c, pa), rank_tol)
}

/// A2 restricted to candidate sets of size `1..=max_size`: whenever
/// `rank(C_S) <= rank(C_PA)` and the images differ, `C_PA beta_PA` must lie
/// outside `im(C_S)`. Returns the first violating set, if any.
pub fn check_a2(
    c: &DMatrix<f64>,
    pa: &[usize],
    beta_pa: &DVector<f64>,
    max_size: usize,
    rank_tol: f64,
    force: bool,
) -> Result<Option<Vec<usize>>> {
    let d = c.ncols();
    if max_size > d {
        return Err(Error::InvalidConfig(alloc::format!("max_size {max_size} exceeds d = {d}")));
    }
    if beta_pa.len() != pa.len() {
        return Err(Error::DimensionMismatch("beta_pa must match the parent set".into()));
    }
    let count: u128 = (1..=max_size).map(|k| binomial(d, k)).sum();
    if !force && count > A2_SUBSET_BUDGET {
        return Err(Error::SizeGuard { count, budget: A2_SUBSET_BUDGET });
    }
    let c_pa = columns(c, pa);
    let rank_pa = linalg::rank(&c_pa, rank_tol);
    let v = &c_pa * beta_pa;
    let v_norm = v.norm();
    for size in 1..=max_size {
        for set in (0..d).combinations(size) {
            let c_s = columns(c, &set);
            if linalg::rank(&c_s, rank_tol) > rank_pa || linalg::same_image(&c_s, &c_pa, rank_tol) {
                continue;
            }
            if linalg::projection_residual(&c_s, &v, rank_tol) <= rank_tol * v_norm {
                return Ok(Some(set));
            }
        }
    }
    Ok(None)
}

/// A3: no other set of the parents' size shares their column space. Returns the
/// first set with an identical image, if any.
pub fn check_a3(c: &DMatrix<f64>, pa: &[usize], rank_tol: f64) -> Option<Vec<usize>> {
    let c_pa = columns(c, pa);
    (0..c.ncols())
        .combinations(pa.len())
        .filter(|set| set.as_slice() != pa)
        .find(|set| linalg::same_image(&columns(c, set), &c_pa, rank_tol))
}

/// Verdicts of the algebraic conditions for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentReport {
    pub pa_y: Vec<usize>,
    pub a1: bool,
    pub a1_rank: usize,
    pub a2: bool,
    pub a2_max_size: usize,
    pub a2_witness: Option<Vec<usize>>,
    pub a3: bool,
    pub a3_witness: Option<Vec<usize>>,
    pub per_coordinate: Vec<bool>,
    pub solution_space_dim: usize,
}

/// Options for [`identify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentOptions {
    pub rank_tol: f64,
    /// Largest candidate size for the A2 sweep.
    pub a2_max_size: usize,
    pub force: bool,
}

impl Default for IdentOptions {
    fn default() -> Self {
        Self { rank_tol: DEFAULT_RANK_TOL, a2_max_size: 3, force: false }
    }
}

/// Checks A1-A3 and per-coordinate identifiability for `scm`.
pub fn identify(scm: &Scm, opts: &IdentOptions) -> Result<IdentReport> {
    let c = scm.total_effect();
    let pa = scm.parents();
    if pa.is_empty() {
        return Err(Error::InvalidConfig("beta has empty support".into()));
    }
    let beta_pa = DVector::from_iterator(pa.len(), pa.iter().map(|&j| scm.beta_star()[j]));
    let a2_max_size = opts.a2_max_size.min(scm.d());
    let a2_witness = check_a2(&c, &pa, &beta_pa, a2_max_size, opts.rank_tol, opts.force)?;
    let a3_witness = check_a3(&c, &pa, opts.rank_tol);
    Ok(IdentReport {
        a1: check_a1(&c, &pa, opts.rank_tol),
        a1_rank: parent_rank(&c, &pa, opts.rank_tol),
        a2: a2_witness.is_none(),
        a2_max_size,
        a2_witness,
        a3: a3_witness.is_none(),
        a3_witness,
        per_coordinate: partial_identifiability(&c, opts.rank_tol),
        solution_space_dim: scm.d() - linalg::rank(&c, opts.rank_tol),
        pa_y: pa,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn mat(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn full_rank_identity_identifies_everything() {
        assert_eq!(partial_identifiability(&DMatrix::identity(3, 3), DEFAULT_RANK_TOL), vec![true; 3]);
    }

    #[test]
    fn appendix_f_identifies_nothing() {
        let c = mat(2, 3, &[4.0, 0.0, 4.0, 0.0, 3.0, 6.0]);
        assert_eq!(partial_identifiability(&c, DEFAULT_RANK_TOL), vec![false; 3]);
    }

    #[test]
    fn single_identified_coordinate() {
        let c = mat(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(partial_identifiability(&c, DEFAULT_RANK_TOL), vec![true, false, false]);
    }

    #[test]
    fn a1_cases() {
        let c = mat(2, 3, &[1.0, 1.0, 0.0, 1.0, 2.0, 1.0]);
        assert!(check_a1(&c, &[1], DEFAULT_RANK_TOL));
        let zero_col = mat(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        assert!(!check_a1(&zero_col, &[1], DEFAULT_RANK_TOL));
        assert!(!check_a1(&c, &[], DEFAULT_RANK_TOL));
    }

    #[test]
    fn a2_appendix_f_witness() {
        let c = mat(2, 3, &[4.0, 0.0, 4.0, 0.0, 3.0, 6.0]);
        let beta_pa = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(check_a2(&c, &[0, 1], &beta_pa, 3, DEFAULT_RANK_TOL, false).unwrap(), Some(vec![2]));
    }

    #[test]
    fn a2_identity_has_no_qualifying_set() {
        let c = DMatrix::identity(3, 3);
        let beta = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        assert_eq!(check_a2(&c, &[0, 1, 2], &beta, 3, DEFAULT_RANK_TOL, false).unwrap(), None);
        assert!(check_a2(&c, &[0, 1, 2], &beta, 4, DEFAULT_RANK_TOL, false).is_err());
    }

    #[test]
    fn a2_size_guard() {
        let c = DMatrix::from_element(2, 40, 1.0);
        let beta = DVector::from_vec(vec![1.0]);
        let err = check_a2(&c, &[0], &beta, 10, DEFAULT_RANK_TOL, false).unwrap_err();
        assert!(matches!(err, Error::SizeGuard { .. }));
    }

    #[test]
    fn a3_example_one_and_duplicates() {
        let c = mat(2, 3, &[1.0, 1.0, 0.0, 1.0, 2.0, 1.0]);
        assert_eq!(check_a3(&c, &[1], DEFAULT_RANK_TOL), None);
        let dup = mat(2, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 1.0]);
        assert_eq!(check_a3(&dup, &[0], DEFAULT_RANK_TOL), Some(vec![1]));
    }
}
