//! Random-model experiment primitives: model generation, assumption
//! grouping, seed derivation and per-run evaluation. The parallel driver and
//! file output live in the `spaceiv` crate.
//!
//! This is the only module that hands ground truth (`beta*`, parent set) to an
//! estimator, and only to the oracle baselines.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimators::{self, DfConvention, OracleMode, StageEstimator, TestConfig};
use crate::graph::random_coefficient;
use crate::identifiability::{check_a1, check_a3};
use crate::linalg::DEFAULT_RANK_TOL;
use crate::model::{sample_dataset, support, Dataset, MomentSystem, NoiseSpec, Scm};

/// Number of non-zero entries of a generated `beta*`.
pub const PARENT_COUNT: usize = 2;
/// Probability of a non-zero instrument loading in a generated `A`.
pub const INSTRUMENT_EDGE_PROB: f64 = 0.1;

/// Which of A1 and A3 a model satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AssumptionGroup {
    A1AndA3,
    A1Only,
    None,
}

impl AssumptionGroup {
    pub const ALL: [AssumptionGroup; 3] = [AssumptionGroup::A1AndA3, AssumptionGroup::A1Only, AssumptionGroup::None];

    pub fn as_str(self) -> &'static str {
        match self {
            AssumptionGroup::A1AndA3 => "A1_and_A3",
            AssumptionGroup::A1Only => "A1_only",
            AssumptionGroup::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.as_str() == s)
    }
}

/// Estimators compared in the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    SpaceIv,
    OlsSparse,
    OracleSize,
    OracleSet,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::SpaceIv, Method::OlsSparse, Method::OracleSize, Method::OracleSet];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::SpaceIv => "spaceIV",
            Method::OlsSparse => "OLS-sparse",
            Method::OracleSize => "oracle-size",
            Method::OracleSet => "oracle-set",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str().eq_ignore_ascii_case(s))
    }
}

/// Experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub d: usize,
    pub m: usize,
    pub q: usize,
    pub n_models: usize,
    pub sample_sizes: Vec<usize>,
    pub s_max: usize,
    pub alpha: f64,
    pub methods: Vec<Method>,
    pub stage_estimator: StageEstimator,
    pub df_convention: DfConvention,
    pub master_seed: u64,
}

impl Default for BenchConfig {
    /// Desk-scale run: 200 models of dimension d = 20, m = 10, q = 1.
    fn default() -> Self {
        Self {
            d: 20,
            m: 10,
            q: 1,
            n_models: 200,
            sample_sizes: vec![50, 100, 200, 400, 800, 1600],
            s_max: 3,
            alpha: 0.05,
            methods: Method::ALL.to_vec(),
            stage_estimator: StageEstimator::Liml,
            df_convention: DfConvention::MThenNm,
            master_seed: 0,
        }
    }
}

impl BenchConfig {
    /// Full-scale variant with 2000 models.
    pub fn full() -> Self {
        Self { n_models: 2000, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.n_models == 0 {
            return fail("n_models must be at least 1");
        }
        if self.d < PARENT_COUNT || self.m == 0 {
            return fail("need d >= 2 and m >= 1");
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return fail("sample sizes must be non-empty and strictly increasing");
        }
        if self.sample_sizes[0] <= self.m.max(self.d) {
            return fail("every sample size must exceed both d and m");
        }
        if self.methods.is_empty() {
            return fail("at least one method is required");
        }
        self.test_config().validate(self.d)
    }

    pub fn test_config(&self) -> TestConfig {
        TestConfig {
            alpha: self.alpha,
            s_max: self.s_max,
            stage_estimator: self.stage_estimator,
            df_convention: self.df_convention,
            ..TestConfig::default()
        }
    }

    pub fn model_seed(&self, model_id: usize) -> u64 {
        derive_seed(self.master_seed, &[0x6d6f_64656c, model_id as u64])
    }

    pub fn data_seed(&self, model_id: usize, n: usize) -> u64 {
        derive_seed(self.master_seed, &[0x6461_7461, model_id as u64, n as u64])
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based seed splitting: the stream for a tag path depends only on the
/// master seed and the tags, never on evaluation order.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

/// Random model: a fully connected DAG under a uniformly random causal order
/// with coefficients uniform on `(-1.5, -0.5) U (0.5, 1.5)`, each row divided by
/// its largest absolute entry; Bernoulli instrument loadings with a unit leading
/// diagonal; two parents with unit effect.
pub fn generate_random_model(cfg: &BenchConfig, model_seed: u64) -> Result<Scm> {
    let (d, m) = (cfg.d, cfg.m);
    let mut rng = ChaCha8Rng::seed_from_u64(model_seed);

    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(&mut rng);
    let mut position = vec![0; d];
    for (pos, &node) in order.iter().enumerate() {
        position[node] = pos;
    }
    let mut b = DMatrix::zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            if position[i] < position[j] {
                b[(j, i)] = random_coefficient(&mut rng);
            }
        }
    }
    for mut row in b.row_iter_mut() {
        let scale = row.amax();
        if scale > 0.0 {
            row /= scale;
        }
    }

    let mut a = DMatrix::zeros(d, m);
    for j in 0..d {
        for k in 0..m {
            if rng.random_bool(INSTRUMENT_EDGE_PROB) {
                a[(j, k)] = 1.0;
            }
        }
    }
    for i in 0..d.min(m) {
        a[(i, i)] = 1.0;
    }

    let mut beta = DVector::zeros(d);
    for j in index::sample(&mut rng, d, PARENT_COUNT) {
        beta[j] = 1.0;
    }

    let noise = NoiseSpec { confounder_dim: cfg.q, ..NoiseSpec::standard(d) };
    Scm::new(b, a, beta, noise)
}

/// Groups a model by whether A1 and A3 hold for its total-effect matrix.
/// A2 is not checked: it holds almost surely for random coefficients.
pub fn classify_assumptions(scm: &Scm) -> AssumptionGroup {
    let c = scm.total_effect();
    let pa = scm.parents();
    match (check_a1(&c, &pa, DEFAULT_RANK_TOL), check_a3(&c, &pa, DEFAULT_RANK_TOL).is_none()) {
        (true, true) => AssumptionGroup::A1AndA3,
        (true, false) => AssumptionGroup::A1Only,
        (false, _) => AssumptionGroup::None,
    }
}

/// Error metrics of one fitted estimate against the truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    pub rmse: f64,
    pub correct_sparsity: bool,
    pub correct_support: bool,
}

impl RunOutcome {
    pub fn score(beta_star: &DVector<f64>, beta_hat: &DVector<f64>) -> Self {
        let truth = support(beta_star);
        let est = support(beta_hat);
        Self {
            rmse: (beta_star - beta_hat).norm(),
            correct_sparsity: truth.len() == est.len(),
            correct_support: truth == est,
        }
    }
}

/// Fits `method` on `data` and scores it against `scm`.
pub fn evaluate(method: Method, scm: &Scm, data: &Dataset, cfg: &BenchConfig) -> Result<RunOutcome> {
    let fit = match method {
        Method::SpaceIv => estimators::space_iv(data, &cfg.test_config())?,
        Method::OlsSparse => estimators::ols_sparse(data, cfg.s_max)?,
        Method::OracleSize | Method::OracleSet => {
            let mode = if method == Method::OracleSet { OracleMode::KnownSet } else { OracleMode::KnownSize };
            estimators::oracle_fit(&MomentSystem::from_dataset(data), &scm.parents(), mode)?
        }
    };
    Ok(RunOutcome::score(scm.beta_star(), &fit.beta_hat))
}

/// Draws the data set for `(model_id, n)` from the configured seed stream.
pub fn model_dataset(cfg: &BenchConfig, scm: &Scm, model_id: usize, n: usize) -> Result<Dataset> {
    sample_dataset(scm, n, cfg.data_seed(model_id, n))
}

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7). `sorted` must be ascending and non-empty.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Location summary of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub mean: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Self {
            count: sorted.len(),
            q1: quantile_type7(&sorted, 0.25),
            median: quantile_type7(&sorted, 0.5),
            q3: quantile_type7(&sorted, 0.75),
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        })
    }
}
