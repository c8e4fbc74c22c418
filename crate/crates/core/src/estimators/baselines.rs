//! Comparison estimators: best-subset OLS by AIC, moment-equation oracles
//! that are told the parent set or its size, and the population limit of the
//! sparsity-level search.

use alloc::vec::Vec;
use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use super::FitResult;
use crate::error::{Error, Result};
use crate::linalg::{self, DEFAULT_RANK_TOL};
use crate::model::{Dataset, MomentSystem};

/// Best-subset OLS (no intercept) over all supports of size `0..=s_max`,
/// selected by `AIC = n ln(RSS / n) + 2 (s + 1)`. Rank-deficient supports are skipped.
pub fn ols_sparse(data: &Dataset, s_max: usize) -> Result<FitResult> {
    let (n, d) = (data.n(), data.d());
    if n <= d {
        return Err(Error::InvalidConfig(alloc::format!("OLS-sparse needs n > d, got n = {n}, d = {d}")));
    }
    if s_max > d {
        return Err(Error::InvalidConfig(alloc::format!("s_max must not exceed d = {d}")));
    }
    let xtx = data.x().transpose() * data.x();
    let xty = data.x().transpose() * data.y();
    let yty = data.y().norm_squared();
    let nf = n as f64;

    let mut best: Option<(f64, Vec<usize>, DVector<f64>)> = None;
    for size in 0..=s_max {
        for set in (0..d).combinations(size) {
            let Ok(coef) = ols_on(&xtx, &xty, &set) else { continue };
            let explained: f64 = set.iter().zip(coef.iter()).map(|(&j, &c)| c * xty[j]).sum();
            let rss = (yty - explained).max(f64::MIN_POSITIVE);
            let aic = nf * libm::log(rss / nf) + 2.0 * (size as f64 + 1.0);
            if best.as_ref().is_none_or(|(b, _, _)| aic < *b) {
                best = Some((aic, set, coef));
            }
        }
    }
    let (aic, set, coef) = best.ok_or(Error::RankDeficientDesign)?;
    Ok(FitResult::from_support(d, &set, &coef, aic))
}

fn ols_on(xtx: &DMatrix<f64>, xty: &DVector<f64>, set: &[usize]) -> Result<DVector<f64>> {
    if set.is_empty() {
        return Ok(DVector::zeros(0));
    }
    let g = DMatrix::from_fn(set.len(), set.len(), |r, c| xtx[(set[r], set[c])]);
    if linalg::reciprocal_condition(&g) < 1e-12 {
        return Err(Error::RankDeficientDesign);
    }
    let rhs = DVector::from_iterator(set.len(), set.iter().map(|&j| xty[j]));
    g.cholesky().map(|ch| ch.solve(&rhs)).ok_or(Error::RankDeficientDesign)
}

/// What the oracle is told about the true parents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    /// The parent set itself.
    KnownSet,
    /// Only its size; the support with the smallest moment loss is chosen.
    KnownSize,
}

/// Least-squares solution of the moment equations on `set` and its squared residual.
fn moment_fit(moments: &MomentSystem, set: &[usize]) -> (DVector<f64>, f64) {
    let sub = linalg::columns(&moments.cov_ix, set);
    let coef = linalg::lstsq(&sub, &moments.cov_iy, DEFAULT_RANK_TOL);
    let loss = (&moments.cov_iy - &sub * &coef).norm_squared();
    (coef, loss)
}

fn best_moment_fit(moments: &MomentSystem, size: usize) -> (Vec<usize>, DVector<f64>, f64) {
    let mut best: Option<(Vec<usize>, DVector<f64>, f64)> = None;
    for set in (0..moments.d()).combinations(size) {
        let (coef, loss) = moment_fit(moments, &set);
        if best.as_ref().is_none_or(|(_, _, b)| loss < *b) {
            best = Some((set, coef, loss));
        }
    }
    best.expect("size <= d yields at least one support")
}

/// Moment-equation oracle with access to the true parents. `statistic` is the
/// squared Euclidean norm of the moment residual.
pub fn oracle_fit(moments: &MomentSystem, pa: &[usize], mode: OracleMode) -> Result<FitResult> {
    let d = moments.d();
    if pa.is_empty() || pa.iter().any(|&j| j >= d) {
        return Err(Error::InvalidConfig("parent set must be non-empty with indices below d".into()));
    }
    let (set, coef, loss) = match mode {
        OracleMode::KnownSet => {
            let (coef, loss) = moment_fit(moments, pa);
            (pa.to_vec(), coef, loss)
        }
        OracleMode::KnownSize => best_moment_fit(moments, pa.len()),
    };
    Ok(FitResult::from_support(d, &set, &coef, loss))
}

/// Population counterpart of the sparsity-level search: at each level the
/// support with the smallest moment residual is accepted once that residual
/// vanishes (relative to `||Cov(I, Y)||` by `tol`).
pub fn space_iv_population(moments: &MomentSystem, s_max: usize, tol: f64) -> Result<FitResult> {
    let d = moments.d();
    if s_max < 1 || s_max > d {
        return Err(Error::InvalidConfig(alloc::format!("s_max must lie in 1..={d}")));
    }
    let threshold = tol * tol * moments.cov_iy.norm_squared().max(f64::MIN_POSITIVE);
    let mut path = Vec::new();
    let mut last = None;
    for s in 1..=s_max {
        let (set, coef, loss) = best_moment_fit(moments, s);
        let accepted = loss <= threshold;
        path.push(super::SparsityStep {
            s,
            support: set.clone(),
            statistic: loss,
            threshold,
            accepted,
            failed_subsets: 0,
        });
        last = Some((set, coef, loss, accepted));
        if accepted {
            break;
        }
    }
    let (set, coef, loss, accepted) = last.expect("s_max >= 1");
    let mut fit = FitResult::from_support(d, &set, &coef, loss);
    fit.threshold = Some(threshold);
    fit.accepted = accepted;
    fit.model_violation_warning = !accepted;
    fit.sparsity_path = path;
    Ok(fit)
}
