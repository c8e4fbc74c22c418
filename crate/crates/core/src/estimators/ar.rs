//! Anderson-Rubin statistic and the per-support LIML and TSLS estimators.
//!
//! Everything is evaluated on the two Gram matrices `W^T P_I W` and
//! `W^T (Id - P_I) W` of `W = [Y | X]`, so each support costs O(s^3) once the
//! moments of a data set are built.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::Dataset;

/// Fraction of the summed quadratic-form magnitude below which `||r||^2` is
/// cancellation noise, i.e. the residual is numerically zero.
const VANISHING_RESIDUAL: f64 = 1e-10;
/// Reciprocal condition number below which `I^T I` counts as singular.
const INSTRUMENT_RCOND: f64 = 1e-12;
/// Relative size of `r^T (Id - P_I) r` against `||r||^2` below which the statistic is undefined.
const DEGENERATE_RESIDUAL: f64 = 1e-12;
/// Relative eigenvalue of `W_S^T W_S` treated as an exact linear fit.
const EXACT_FIT: f64 = 1e-13;
const MIN_NORMALIZER: f64 = 1e-12;

/// Instrument-projected and residual second moments of `[Y | X]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IvMoments {
    n: usize,
    m: usize,
    /// `W^T P_I W`; index 0 is `Y`, index `j + 1` is predictor `j`.
    projected: DMatrix<f64>,
    /// `W^T (Id - P_I) W`.
    residual: DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl IvMoments {
    pub fn new(data: &Dataset) -> Result<Self> {
        Self::from_parts(data.x(), data.y(), data.instruments())
    }

    pub fn from_parts(x: &DMatrix<f64>, y: &DVector<f64>, instruments: &DMatrix<f64>) -> Result<Self> {
        let (n, m) = instruments.shape();
        if x.nrows() != n || y.len() != n {
            return Err(Error::DimensionMismatch("X, Y and I must have equal row counts".into()));
        }
        if n <= m {
            return Err(Error::InvalidSampleSize { n, m });
        }
        let qr = instruments.clone().qr();
        let r = qr.r();
        if crate::linalg::reciprocal_condition(&r) < INSTRUMENT_RCOND {
            return Err(Error::RankDeficientInstruments);
        }
        let q = qr.q();
        let mut w = DMatrix::zeros(n, x.ncols() + 1);
        w.column_mut(0).copy_from(y);
        w.columns_mut(1, x.ncols()).copy_from(x);
        let coords = q.transpose() * &w;
        let resid = &w - &q * &coords;
        let projected = coords.transpose() * &coords;
        let residual = resid.transpose() * &resid;
        let gram = &projected + &residual;
        Ok(Self { n, m, projected, residual, gram })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.projected.ncols() - 1
    }

    /// Uncentered `W^T W`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    fn scale(&self) -> f64 {
        (self.n - self.m) as f64 / self.m as f64
    }

    /// Anderson-Rubin statistic at `beta` supported on `support`.
    pub fn ar_statistic(&self, support: &[usize], coef: &DVector<f64>) -> Result<f64> {
        if support.len() != coef.len() {
            return Err(Error::DimensionMismatch("support and coefficient lengths differ".into()));
        }
        let idx = response_and(support);
        let mut a = DVector::zeros(idx.len());
        a[0] = 1.0;
        for (k, &c) in coef.iter().enumerate() {
            a[k + 1] = -c;
        }
        let num = quad(&self.projected, &idx, &a);
        let den = quad(&self.residual, &idx, &a);
        let magnitude = quad_abs(&self.gram, &idx, &a);
        if den.is_nan() || den <= DEGENERATE_RESIDUAL * (num + den) || num + den <= VANISHING_RESIDUAL * magnitude {
            return Err(Error::DegenerateResidual);
        }
        Ok(num / den * self.scale())
    }

    /// LIML on `support`: the coefficients minimizing the AR statistic.
    pub fn liml(&self, support: &[usize]) -> Result<DVector<f64>> {
        let idx = response_and(support);
        let proj = submatrix(&self.projected, &idx);
        let gram = &proj + submatrix(&self.residual, &idx);
        let a = min_ratio_direction(&proj, &gram)?;
        if a[0].abs() < MIN_NORMALIZER * a.norm() {
            return Err(Error::NormalizationFailure);
        }
        Ok(DVector::from_iterator(support.len(), a.iter().skip(1).map(|v| -v / a[0])))
    }

    /// Two-stage least squares on `support`.
    pub fn tsls(&self, support: &[usize]) -> Result<DVector<f64>> {
        let cols: Vec<usize> = support.iter().map(|j| j + 1).collect();
        let xpx = submatrix(&self.projected, &cols);
        if crate::linalg::reciprocal_condition(&xpx) < 1e-12 {
            return Err(Error::RankDeficientFirstStage);
        }
        let xpy = DVector::from_iterator(cols.len(), cols.iter().map(|&c| self.projected[(c, 0)]));
        xpx.cholesky().map(|ch| ch.solve(&xpy)).ok_or(Error::RankDeficientFirstStage)
    }
}

fn response_and(support: &[usize]) -> Vec<usize> {
    core::iter::once(0).chain(support.iter().map(|j| j + 1)).collect()
}

fn submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

fn quad_abs(m: &DMatrix<f64>, idx: &[usize], a: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for (r, &ir) in idx.iter().enumerate() {
        for (c, &ic) in idx.iter().enumerate() {
            acc += (a[r] * m[(ir, ic)] * a[c]).abs();
        }
    }
    acc
}

fn quad(m: &DMatrix<f64>, idx: &[usize], a: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for (r, &ir) in idx.iter().enumerate() {
        for (c, &ic) in idx.iter().enumerate() {
            acc += a[r] * m[(ir, ic)] * a[c];
        }
    }
    acc
}

/// Direction `a` minimizing `a^T P a / a^T G a` for PSD `P` and `G = P + R`.
///
/// `G` is whitened through its eigendecomposition; a numerically singular `G`
/// means an exact linear fit, whose null direction attains ratio zero.
fn min_ratio_direction(p: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<DVector<f64>> {
    let eig = g.clone().symmetric_eigen();
    let (lo_idx, lo) = argmin(eig.eigenvalues.iter().copied()).ok_or(Error::EigenFailure)?;
    let hi = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if !hi.is_finite() || hi <= 0.0 {
        return Err(Error::EigenFailure);
    }
    if lo <= EXACT_FIT * hi {
        return Ok(eig.eigenvectors.column(lo_idx).into_owned());
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / libm::sqrt(l)));
    let whiten = &eig.eigenvectors * inv_sqrt;
    let mut pencil = whiten.transpose() * p * &whiten;
    pencil = (&pencil + pencil.transpose()) * 0.5;
    let inner = pencil.symmetric_eigen();
    let (k, _) = argmin(inner.eigenvalues.iter().copied()).ok_or(Error::EigenFailure)?;
    let a = whiten * inner.eigenvectors.column(k);
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure);
    }
    Ok(a)
}

fn argmin(values: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    values.enumerate().fold(None, |best, (i, v)| match best {
        Some((_, b)) if b <= v => best,
        _ if v.is_nan() => best,
        _ => Some((i, v)),
    })
}

/// Anderson-Rubin statistic `(r^T P_I r) / (r^T (Id - P_I) r) * (n - m) / m`
/// with `r = Y - X beta`, computed directly from the data.
pub fn ar_statistic(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    instruments: &DMatrix<f64>,
    beta: &DVector<f64>,
) -> Result<f64> {
    let (n, m) = instruments.shape();
    if x.nrows() != n || y.len() != n || x.ncols() != beta.len() {
        return Err(Error::DimensionMismatch("X, Y, I and beta are inconsistent".into()));
    }
    if n <= m {
        return Err(Error::InvalidSampleSize { n, m });
    }
    let qr = instruments.clone().qr();
    if crate::linalg::reciprocal_condition(&qr.r()) < INSTRUMENT_RCOND {
        return Err(Error::RankDeficientInstruments);
    }
    let q = qr.q();
    let r = y - x * beta;
    let proj = &q * (q.transpose() * &r);
    let num = proj.norm_squared();
    let den = (&r - proj).norm_squared();
    let vanishing = r.norm_squared() <= VANISHING_RESIDUAL * VANISHING_RESIDUAL * y.norm_squared();
    if den.is_nan() || den <= DEGENERATE_RESIDUAL * r.norm_squared() || vanishing {
        return Err(Error::DegenerateResidual);
    }
    Ok(num / den * (n - m) as f64 / m as f64)
}

/// LIML estimate regressing `y` on all columns of `x_s`.
pub fn liml(x_s: &DMatrix<f64>, y: &DVector<f64>, instruments: &DMatrix<f64>) -> Result<DVector<f64>> {
    let all: Vec<usize> = (0..x_s.ncols()).collect();
    IvMoments::from_parts(x_s, y, instruments)?.liml(&all)
}

/// TSLS estimate `(X^T P_I X)^{-1} X^T P_I Y` over all columns of `x_s`.
pub fn tsls(x_s: &DMatrix<f64>, y: &DVector<f64>, instruments: &DMatrix<f64>) -> Result<DVector<f64>> {
    let all: Vec<usize> = (0..x_s.ncols()).collect();
    IvMoments::from_parts(x_s, y, instruments)?.tsls(&all)
}
