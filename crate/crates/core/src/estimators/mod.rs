//! Finite-sample estimation: the sparsity-level search driven by the
//! Anderson-Rubin test, the subset-intersection procedure, and baselines.

mod ar;
mod baselines;

pub use ar::{ar_statistic, liml, tsls, IvMoments};
pub use baselines::{ols_sparse, oracle_fit, space_iv_population, OracleMode};

use alloc::borrow::Cow;
use alloc::vec::Vec;
use itertools::Itertools;
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{support, Dataset};
use crate::special::FDist;

/// Per-support estimator used inside the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StageEstimator {
    #[default]
    Liml,
    Tsls,
}

/// Degrees-of-freedom ordering of the F reference law for the AR statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DfConvention {
    /// `F(m, n - m)`: numerator rank first. Calibrated under the null.
    #[default]
    MThenNm,
    /// `F(n - m, m)`.
    NmThenM,
}

/// Test level, sparsity cap and estimator choices for the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestConfig {
    pub alpha: f64,
    pub s_max: usize,
    pub stage_estimator: StageEstimator,
    pub df_convention: DfConvention,
    /// Test the empty support before sparsity level one.
    pub test_empty_support: bool,
    /// Center every column before fitting (for data with non-zero means).
    pub center: bool,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            s_max: 3,
            stage_estimator: StageEstimator::Liml,
            df_convention: DfConvention::MThenNm,
            test_empty_support: false,
            center: false,
        }
    }
}

impl TestConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(alloc::format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.s_max < 1 || self.s_max > d {
            return Err(Error::InvalidConfig(alloc::format!("s_max must lie in 1..={d}, got {}", self.s_max)));
        }
        Ok(())
    }

    /// `(1 - alpha)`-quantile of the reference F law.
    pub fn threshold(&self, n: usize, m: usize) -> f64 {
        let (num, den) = ((m) as f64, (n - m) as f64);
        let dist = match self.df_convention {
            DfConvention::MThenNm => FDist::new(num, den),
            DfConvention::NmThenM => FDist::new(den, num),
        };
        dist.inverse_cdf(1.0 - self.alpha)
    }
}

/// Best support found at one sparsity level.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityStep {
    pub s: usize,
    pub support: Vec<usize>,
    pub statistic: f64,
    pub threshold: f64,
    pub accepted: bool,
    /// Supports whose fit or statistic failed and were skipped.
    pub failed_subsets: usize,
}

/// Output of an estimator.
///
/// For the AR-test based search, `statistic` is the AR value at `beta_hat` and
/// `threshold` the F quantile; baselines report their own selection criterion
/// and no threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta_hat: DVector<f64>,
    pub support: Vec<usize>,
    pub statistic: f64,
    pub threshold: Option<f64>,
    pub accepted: bool,
    /// Set when no sparsity level up to `s_max` passed the test.
    pub model_violation_warning: bool,
    pub sparsity_path: Vec<SparsityStep>,
}

impl FitResult {
    pub(crate) fn from_support(d: usize, set: &[usize], coef: &DVector<f64>, statistic: f64) -> Self {
        let beta_hat = embed(d, set, coef);
        Self {
            support: support(&beta_hat),
            beta_hat,
            statistic,
            threshold: None,
            accepted: false,
            model_violation_warning: false,
            sparsity_path: Vec::new(),
        }
    }
}

pub(crate) fn embed(d: usize, set: &[usize], coef: &DVector<f64>) -> DVector<f64> {
    let mut beta = DVector::zeros(d);
    for (&j, &c) in set.iter().zip(coef.iter()) {
        beta[j] = c;
    }
    beta
}

fn prepared(data: &Dataset, cfg: &TestConfig) -> Result<IvMoments> {
    cfg.validate(data.d())?;
    let data: Cow<'_, Dataset> = if cfg.center { Cow::Owned(data.centered()) } else { Cow::Borrowed(data) };
    IvMoments::new(&data)
}

/// Fits one support and returns its coefficients with the AR statistic.
pub fn fit_support(mom: &IvMoments, set: &[usize], estimator: StageEstimator) -> Result<(DVector<f64>, f64)> {
    let coef = match estimator {
        StageEstimator::Liml => mom.liml(set)?,
        StageEstimator::Tsls => mom.tsls(set)?,
    };
    let stat = mom.ar_statistic(set, &coef)?;
    if stat.is_nan() {
        return Err(Error::EigenFailure);
    }
    Ok((coef, stat))
}

struct LevelBest {
    set: Vec<usize>,
    coef: DVector<f64>,
    statistic: f64,
    failed: usize,
}

/// Minimum-statistic support of size `s`; ties go to the lexicographically first set.
fn best_at_level(mom: &IvMoments, s: usize, estimator: StageEstimator) -> Result<LevelBest> {
    let mut best: Option<(Vec<usize>, DVector<f64>, f64)> = None;
    let mut failed = 0;
    for set in (0..mom.d()).combinations(s) {
        match fit_support(mom, &set, estimator) {
            Ok((coef, stat)) => {
                if best.as_ref().is_none_or(|(_, _, b)| stat < *b) {
                    best = Some((set, coef, stat));
                }
            }
            Err(_) => failed += 1,
        }
    }
    let (set, coef, statistic) = best.ok_or(Error::AllSubsetsFailed(s))?;
    Ok(LevelBest { set, coef, statistic, failed })
}

/// Sparsity-level search: for `s = 1, 2, ..` pick the support minimizing the AR
/// statistic of its per-support estimate and stop at the first level whose
/// minimum passes the test, or at `s_max` with a warning.
pub fn space_iv(data: &Dataset, cfg: &TestConfig) -> Result<FitResult> {
    let mom = prepared(data, cfg)?;
    let d = data.d();
    let threshold = cfg.threshold(mom.n(), mom.m());
    let mut path = Vec::new();

    if cfg.test_empty_support {
        if let Ok(stat) = mom.ar_statistic(&[], &DVector::zeros(0)) {
            let accepted = stat <= threshold;
            path.push(SparsityStep {
                s: 0,
                support: Vec::new(),
                statistic: stat,
                threshold,
                accepted,
                failed_subsets: 0,
            });
            if accepted {
                let mut fit = FitResult::from_support(d, &[], &DVector::zeros(0), stat);
                fit.threshold = Some(threshold);
                fit.accepted = true;
                fit.sparsity_path = path;
                return Ok(fit);
            }
        }
    }

    let mut last = None;
    for s in 1..=cfg.s_max {
        let best = best_at_level(&mom, s, cfg.stage_estimator)?;
        let accepted = best.statistic <= threshold;
        path.push(SparsityStep {
            s,
            support: best.set.clone(),
            statistic: best.statistic,
            threshold,
            accepted,
            failed_subsets: best.failed,
        });
        last = Some(best);
        if accepted {
            break;
        }
    }
    let best = last.expect("s_max >= 1");
    let accepted = best.statistic <= threshold;
    let mut fit = FitResult::from_support(d, &best.set, &best.coef, best.statistic);
    fit.threshold = Some(threshold);
    fit.accepted = accepted;
    fit.model_violation_warning = !accepted;
    fit.sparsity_path = path;
    Ok(fit)
}

/// Which supports are intersected by [`subset_intersection`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntersectionMode {
    /// All accepted supports of this size.
    FixedSize(usize),
    /// Accepted supports of the smallest size (up to `s_max`) with any acceptance.
    Minimal,
}

/// Result of [`subset_intersection`].
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionResult {
    /// Intersection of the accepted supports; empty when none was accepted.
    pub set: Vec<usize>,
    /// Size of the intersected supports (`None` in minimal mode without acceptance).
    pub size: Option<usize>,
    pub accepted_sets: Vec<Vec<usize>>,
}

fn accepted_supports(mom: &IvMoments, size: usize, cfg: &TestConfig, threshold: f64) -> Vec<Vec<usize>> {
    (0..mom.d())
        .combinations(size)
        .filter(|set| matches!(fit_support(mom, set, cfg.stage_estimator), Ok((_, t)) if t <= threshold))
        .collect()
}

fn intersect(sets: &[Vec<usize>]) -> Vec<usize> {
    let Some((first, rest)) = sets.split_first() else {
        return Vec::new();
    };
    first.iter().copied().filter(|j| rest.iter().all(|s| s.contains(j))).collect()
}

/// Intersects every support whose per-support AR test is accepted.
pub fn subset_intersection(data: &Dataset, cfg: &TestConfig, mode: IntersectionMode) -> Result<IntersectionResult> {
    let mom = prepared(data, cfg)?;
    let threshold = cfg.threshold(mom.n(), mom.m());
    match mode {
        IntersectionMode::FixedSize(k) => {
            if k == 0 || k > data.d() {
                return Err(Error::InvalidConfig(alloc::format!("subset size must lie in 1..={}", data.d())));
            }
            let accepted = accepted_supports(&mom, k, cfg, threshold);
            Ok(IntersectionResult { set: intersect(&accepted), size: Some(k), accepted_sets: accepted })
        }
        IntersectionMode::Minimal => {
            for k in 1..=cfg.s_max {
                let accepted = accepted_supports(&mom, k, cfg, threshold);
                if !accepted.is_empty() {
                    return Ok(IntersectionResult {
                        set: intersect(&accepted),
                        size: Some(k),
                        accepted_sets: accepted,
                    });
                }
            }
            Ok(IntersectionResult { set: Vec::new(), size: None, accepted_sets: Vec::new() })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn intersection_conventions() {
        assert!(intersect(&[]).is_empty());
        assert_eq!(intersect(&[vec![0, 1], vec![0, 2]]), vec![0]);
        assert_eq!(intersect(&[vec![3, 4]]), vec![3, 4]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = TestConfig::default();
        assert!(cfg.validate(3).is_ok());
        cfg.alpha = 1.0;
        assert!(cfg.validate(3).is_err());
        cfg.alpha = 0.05;
        cfg.s_max = 4;
        assert!(cfg.validate(3).is_err());
        cfg.s_max = 0;
        assert!(cfg.validate(3).is_err());
    }

    #[test]
    fn df_conventions_swap_degrees_of_freedom() {
        let a = TestConfig::default();
        let b = TestConfig { df_convention: DfConvention::NmThenM, ..a };
        // scipy.stats.f.ppf(0.95, 10, 490) and f.ppf(0.95, 490, 10)
        approx::assert_relative_eq!(a.threshold(500, 10), 1.8500249835223816, max_relative = 1e-10);
        approx::assert_relative_eq!(b.threshold(500, 10), 2.5483495315065054, max_relative = 1e-10);
    }
}
