//! The linear IV structural causal model
//!
//! ```text
//! X := B X + A I + loading_x * H + eps_x
//! Y := X^T beta + loading_y * H + eps_y
//! ```
//!
//! together with its total-effect matrix `C = A^T (Id - B)^{-T}`, a seeded
//! sampler and empirical/population moment systems.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;

/// Minimum reciprocal condition number accepted for `Id - B`.
pub const MIN_RCOND: f64 = 1e-10;

/// Distribution of the instrument vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InstrumentLaw {
    /// i.i.d. standard normal components.
    #[default]
    StandardNormal,
    /// `I = e_k` with `k` uniform on `{1, .., m}`: one shift experiment per row.
    UnitVectors,
}

/// Additive Gaussian noise and confounding.
///
/// Each of the `confounder_dim` hidden components enters every predictor with
/// weight `confounder_loading_x[j]` and the response with `confounder_loading_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub confounder_dim: usize,
    pub confounder_loading_x: DVector<f64>,
    pub confounder_loading_y: f64,
    pub eps_x_scale: DVector<f64>,
    pub eps_y_scale: f64,
    pub instrument_law: InstrumentLaw,
}

impl NoiseSpec {
    /// One hidden confounder with unit loadings, unit noise scales, Gaussian instruments.
    pub fn standard(d: usize) -> Self {
        Self {
            confounder_dim: 1,
            confounder_loading_x: DVector::from_element(d, 1.0),
            confounder_loading_y: 1.0,
            eps_x_scale: DVector::from_element(d, 1.0),
            eps_y_scale: 1.0,
            instrument_law: InstrumentLaw::StandardNormal,
        }
    }

    /// Same as [`NoiseSpec::standard`] but without hidden confounding.
    pub fn unconfounded(d: usize) -> Self {
        Self { confounder_loading_x: DVector::zeros(d), confounder_loading_y: 0.0, ..Self::standard(d) }
    }

    pub fn with_instrument_law(mut self, law: InstrumentLaw) -> Self {
        self.instrument_law = law;
        self
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.confounder_loading_x.len() != d || self.eps_x_scale.len() != d {
            return Err(Error::DimensionMismatch(format!("noise vectors must have length d = {d}")));
        }
        let positive = self.eps_x_scale.iter().all(|&s| s > 0.0 && s.is_finite());
        if !positive || !(self.eps_y_scale > 0.0 && self.eps_y_scale.is_finite()) {
            return Err(Error::InvalidConfig("noise scales must be strictly positive".into()));
        }
        Ok(())
    }
}

/// Linear IV structural causal model.
#[derive(Debug, Clone, PartialEq)]
pub struct Scm {
    b: DMatrix<f64>,
    a: DMatrix<f64>,
    beta_star: DVector<f64>,
    noise: NoiseSpec,
}

impl Scm {
    /// Validates dimensions, noise scales and invertibility of `Id - B`.
    pub fn new(b: DMatrix<f64>, a: DMatrix<f64>, beta_star: DVector<f64>, noise: NoiseSpec) -> Result<Self> {
        let d = b.nrows();
        if b.ncols() != d {
            return Err(Error::DimensionMismatch(format!("B must be square, got {}x{}", d, b.ncols())));
        }
        if a.nrows() != d {
            return Err(Error::DimensionMismatch(format!("A must have {d} rows, got {}", a.nrows())));
        }
        if a.ncols() == 0 {
            return Err(Error::DimensionMismatch("at least one instrument is required".into()));
        }
        if beta_star.len() != d {
            return Err(Error::DimensionMismatch(format!("beta must have length {d}, got {}", beta_star.len())));
        }
        noise.validate(d)?;
        check_invertible(&b)?;
        Ok(Self { b, a, beta_star, noise })
    }

    pub fn d(&self) -> usize {
        self.b.nrows()
    }

    pub fn m(&self) -> usize {
        self.a.ncols()
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn beta_star(&self) -> &DVector<f64> {
        &self.beta_star
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    /// Indices of the non-zero entries of `beta_star`, ascending.
    pub fn parents(&self) -> Vec<usize> {
        support(&self.beta_star)
    }

    /// `C = A^T (Id - B)^{-T}`.
    pub fn total_effect(&self) -> DMatrix<f64> {
        total_effect_matrix(&self.a, &self.b).expect("invertibility checked at construction")
    }

    /// Population covariance of the instrument vector.
    pub fn instrument_covariance(&self) -> DMatrix<f64> {
        let m = self.m();
        match self.noise.instrument_law {
            InstrumentLaw::StandardNormal => DMatrix::identity(m, m),
            InstrumentLaw::UnitVectors => {
                let mf = m as f64;
                DMatrix::identity(m, m) / mf - DMatrix::from_element(m, m, 1.0 / (mf * mf))
            }
        }
    }
}

/// Indices of non-zero entries.
pub fn support(v: &DVector<f64>) -> Vec<usize> {
    v.iter().enumerate().filter(|(_, &x)| x != 0.0).map(|(i, _)| i).collect()
}

fn check_invertible(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = b.nrows();
    let id_minus_b = DMatrix::identity(d, d) - b;
    let rcond = linalg::reciprocal_condition(&id_minus_b);
    if rcond.is_nan() || rcond < MIN_RCOND {
        return Err(Error::SingularStructure { rcond });
    }
    Ok(id_minus_b)
}

/// Total causal effect of the instruments on the predictors, `A^T (Id - B)^{-T}` (m x d).
pub fn total_effect_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.nrows() != b.ncols() || a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch("A must be d x m and B d x d".into()));
    }
    let id_minus_b = check_invertible(b)?;
    let lu = id_minus_b.lu();
    let solved = lu.solve(a).ok_or(Error::SingularStructure { rcond: 0.0 })?;
    Ok(solved.transpose())
}

/// Effect matrix when predictors may also be children of `Y`.
///
/// Builds `B_ext = [[B, gamma], [beta^T, 0]]` and returns the first `d` columns of
/// `(A^T, 0) (Id - B_ext)^{-T}`.
pub fn extended_effect_matrix(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    gamma: &DVector<f64>,
    beta_star: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let d = b.nrows();
    if b.ncols() != d || a.nrows() != d || gamma.len() != d || beta_star.len() != d {
        return Err(Error::DimensionMismatch("A d x m, B d x d, gamma and beta length d".into()));
    }
    let mut b_ext = DMatrix::zeros(d + 1, d + 1);
    b_ext.view_mut((0, 0), (d, d)).copy_from(b);
    b_ext.view_mut((0, d), (d, 1)).copy_from(gamma);
    b_ext.view_mut((d, 0), (1, d)).copy_from(&beta_star.transpose());
    let mut a_ext = DMatrix::zeros(d + 1, a.ncols());
    a_ext.view_mut((0, 0), (d, a.ncols())).copy_from(a);
    let full = total_effect_matrix(&a_ext, &b_ext)?;
    Ok(full.columns(0, d).into_owned())
}

/// `n` observations of instruments, predictors and response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    i: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, i: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let n = y.len();
        if x.nrows() != n || i.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "X has {} rows, I has {} rows, Y has length {n}",
                x.nrows(),
                i.nrows()
            )));
        }
        if i.ncols() == 0 || x.ncols() == 0 {
            return Err(Error::DimensionMismatch("need at least one predictor and one instrument".into()));
        }
        if n <= i.ncols() {
            return Err(Error::InvalidSampleSize { n, m: i.ncols() });
        }
        Ok(Self { x, i, y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn m(&self) -> usize {
        self.i.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn instruments(&self) -> &DMatrix<f64> {
        &self.i
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Copy with every column (of X, I and Y) centered at its sample mean.
    pub fn centered(&self) -> Self {
        fn center(m: &DMatrix<f64>) -> DMatrix<f64> {
            let mut out = m.clone();
            for mut col in out.column_iter_mut() {
                let mean = col.mean();
                col.add_scalar_mut(-mean);
            }
            out
        }
        let y_mean = self.y.mean();
        Self { x: center(&self.x), i: center(&self.i), y: self.y.add_scalar(-y_mean) }
    }
}

/// Draws `n` i.i.d. rows from `scm`; a pure function of `(scm, n, seed)`.
pub fn sample_dataset(scm: &Scm, n: usize, seed: u64) -> Result<Dataset> {
    let (d, m) = (scm.d(), scm.m());
    if n <= m {
        return Err(Error::InvalidSampleSize { n, m });
    }
    let id_minus_b = check_invertible(&scm.b)?;
    let inv = id_minus_b.try_inverse().ok_or(Error::SingularStructure { rcond: 0.0 })?;
    let noise = &scm.noise;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut instruments = DMatrix::zeros(n, m);
    let mut shocks = DMatrix::zeros(n, d);
    let mut y_noise = DVector::zeros(n);
    for row in 0..n {
        match noise.instrument_law {
            InstrumentLaw::StandardNormal => {
                for k in 0..m {
                    instruments[(row, k)] = rng.sample::<f64, _>(StandardNormal);
                }
            }
            InstrumentLaw::UnitVectors => {
                instruments[(row, rng.random_range(0..m))] = 1.0;
            }
        }
        let hidden: f64 = (0..noise.confounder_dim).map(|_| rng.sample::<f64, _>(StandardNormal)).sum();
        for j in 0..d {
            let eps: f64 = rng.sample(StandardNormal);
            shocks[(row, j)] = noise.confounder_loading_x[j] * hidden + noise.eps_x_scale[j] * eps;
        }
        let eps: f64 = rng.sample(StandardNormal);
        y_noise[row] = noise.confounder_loading_y * hidden + noise.eps_y_scale * eps;
    }
    // Row-wise X = (Id - B)^{-1} (A I + shocks).
    let x = (&instruments * scm.a.transpose() + shocks) * inv.transpose();
    let y = &x * &scm.beta_star + y_noise;
    Dataset::new(x, instruments, y)
}

/// The linear moment equations `Cov(I, X) beta = Cov(I, Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSystem {
    /// `Cov(I, X)`, m x d.
    pub cov_ix: DMatrix<f64>,
    /// `Cov(I, Y)`, length m.
    pub cov_iy: DVector<f64>,
}

impl MomentSystem {
    /// Sample covariances (centered, normalized by `n`).
    pub fn from_dataset(data: &Dataset) -> Self {
        let c = data.centered();
        let n = data.n() as f64;
        Self { cov_ix: c.i.transpose() * &c.x / n, cov_iy: c.i.transpose() * &c.y / n }
    }

    /// Exact population moments `Cov(I) C` and `Cov(I) C beta*`.
    pub fn population(scm: &Scm) -> Self {
        let cov_ix = scm.instrument_covariance() * scm.total_effect();
        let cov_iy = &cov_ix * &scm.beta_star;
        Self { cov_ix, cov_iy }
    }

    pub fn d(&self) -> usize {
        self.cov_ix.ncols()
    }

    pub fn m(&self) -> usize {
        self.cov_ix.nrows()
    }

    /// `Cov(I, Y - X^T beta)`.
    pub fn residual(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        if beta.len() != self.d() {
            return Err(Error::DimensionMismatch(format!("beta has length {}, expected {}", beta.len(), self.d())));
        }
        Ok(&self.cov_iy - &self.cov_ix * beta)
    }
}

/// `Cov(I, Y - X^T beta)` from either sample or population moments.
pub fn moment_residual(moments: &MomentSystem, beta: &DVector<f64>) -> Result<DVector<f64>> {
    moments.residual(beta)
}
