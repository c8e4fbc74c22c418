//! Parallel benchmark driver and its output tables.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use spaceiv_core::bench::{
    classify_assumptions, evaluate, generate_random_model, model_dataset, AssumptionGroup, BenchConfig, Method,
    RunOutcome, Summary,
};
use spaceiv_core::estimators::DfConvention;
use spaceiv_core::{Scm, StageEstimator};

use crate::error::{Error, Result};
use crate::io::{write_json, ScmFile};

/// One fitted run. `outcome` is `None` when the fit failed; `error` says why.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub model_id: usize,
    pub group: AssumptionGroup,
    pub n: usize,
    pub method: Method,
    pub outcome: Option<RunOutcome>,
    pub error: Option<String>,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelEntry {
    pub model_id: usize,
    pub group: AssumptionGroup,
    pub scm: Option<Scm>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutput {
    pub config: BenchConfig,
    pub models: Vec<ModelEntry>,
    pub records: Vec<BenchRecord>,
}

fn method_rank(m: Method) -> usize {
    Method::ALL.iter().position(|&x| x == m).unwrap_or(usize::MAX)
}

fn run_model(cfg: &BenchConfig, model_id: usize) -> (ModelEntry, Vec<BenchRecord>) {
    let scm = generate_random_model(cfg, cfg.model_seed(model_id));
    let group = scm.as_ref().map(classify_assumptions).unwrap_or(AssumptionGroup::None);
    let mut records = Vec::with_capacity(cfg.sample_sizes.len() * cfg.methods.len());
    for &n in &cfg.sample_sizes {
        let data = scm.as_ref().map_err(|e| e.clone()).and_then(|s| model_dataset(cfg, s, model_id, n));
        for &method in &cfg.methods {
            let start = Instant::now();
            let result = match (&scm, &data) {
                (Ok(s), Ok(d)) => evaluate(method, s, d, cfg),
                (Err(e), _) | (_, Err(e)) => Err(e.clone()),
            };
            let wall_time = start.elapsed();
            let (outcome, error) = match result {
                Ok(o) => (Some(o), None),
                Err(e) => (None, Some(e.to_string())),
            };
            records.push(BenchRecord { model_id, group, n, method, outcome, error, wall_time });
        }
    }
    (ModelEntry { model_id, group, scm: scm.ok() }, records)
}

/// Runs every model, sample size and method. Records are sorted by
/// `(model_id, n, method)` so the output does not depend on scheduling.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchOutput> {
    cfg.validate()?;
    let per_model: Vec<_> = (0..cfg.n_models).into_par_iter().map(|id| run_model(cfg, id)).collect();
    let mut models = Vec::with_capacity(per_model.len());
    let mut records = Vec::new();
    for (entry, recs) in per_model {
        models.push(entry);
        records.extend(recs);
    }
    models.sort_by_key(|m| m.model_id);
    records.sort_by_key(|r| (r.model_id, r.n, method_rank(r.method)));
    Ok(BenchOutput { config: cfg.clone(), models, records })
}

/// Aggregate over one `(method, n, group)` cell; `group` is `None` for all models.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub n: usize,
    pub group: Option<AssumptionGroup>,
    pub runs: usize,
    pub failures: usize,
    pub rmse: Option<Summary>,
    pub frac_correct_sparsity: Option<f64>,
    pub frac_correct_support: Option<f64>,
}

impl SummaryRow {
    pub fn group_label(&self) -> &'static str {
        self.group.map_or("all", AssumptionGroup::as_str)
    }
}

fn summarize_cell<'a>(
    method: Method,
    n: usize,
    group: Option<AssumptionGroup>,
    records: impl Iterator<Item = &'a BenchRecord>,
) -> SummaryRow {
    let mut runs = 0;
    let mut outcomes = Vec::new();
    for r in records {
        runs += 1;
        if let Some(o) = r.outcome {
            outcomes.push(o);
        }
    }
    let rmse: Vec<f64> = outcomes.iter().map(|o| o.rmse).collect();
    let frac = |f: fn(&RunOutcome) -> bool| {
        (!outcomes.is_empty()).then(|| outcomes.iter().filter(|o| f(o)).count() as f64 / outcomes.len() as f64)
    };
    SummaryRow {
        method,
        n,
        group,
        runs,
        failures: runs - outcomes.len(),
        rmse: Summary::of(&rmse),
        frac_correct_sparsity: frac(|o| o.correct_sparsity),
        frac_correct_support: frac(|o| o.correct_support),
    }
}

impl BenchOutput {
    pub fn group_counts(&self) -> [(AssumptionGroup, usize); 3] {
        AssumptionGroup::ALL.map(|g| (g, self.models.iter().filter(|m| m.group == g).count()))
    }

    pub fn cell(&self, method: Method, n: usize, group: Option<AssumptionGroup>) -> SummaryRow {
        summarize_cell(
            method,
            n,
            group,
            self.records.iter().filter(|r| r.method == method && r.n == n && group.is_none_or(|g| r.group == g)),
        )
    }

    /// Every `(method, n, group)` cell plus the pooled `all` group.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let groups = std::iter::once(None).chain(AssumptionGroup::ALL.map(Some));
        let groups: Vec<_> = groups.collect();
        let mut rows = Vec::new();
        for &method in &self.config.methods {
            for &n in &self.config.sample_sizes {
                for &group in &groups {
                    rows.push(self.cell(method, n, group));
                }
            }
        }
        rows
    }

    pub fn failures(&self) -> impl Iterator<Item = &BenchRecord> {
        self.records.iter().filter(|r| r.error.is_some())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<fs::File>> {
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(Error::io(&path))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<fs::File>) -> Result<()> {
    w.flush().map_err(|e| Error::Csv(e.into()))
}

fn summary_fields(row: &SummaryRow) -> Vec<String> {
    let s = row.rmse;
    vec![
        row.runs.to_string(),
        row.failures.to_string(),
        opt(s.map(|s| s.median)),
        opt(s.map(|s| s.q1)),
        opt(s.map(|s| s.q3)),
        opt(s.map(|s| s.mean)),
        opt(row.frac_correct_sparsity),
        opt(row.frac_correct_support),
    ]
}

const SUMMARY_FIELDS: [&str; 8] = [
    "runs",
    "failures",
    "rmse_median",
    "rmse_q1",
    "rmse_q3",
    "rmse_mean",
    "frac_correct_sparsity",
    "frac_correct_support",
];

#[derive(Serialize)]
struct ModelJson<'a> {
    model_id: usize,
    group: &'static str,
    model: Option<ScmFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

/// Writes every table of a run into `dir` (created if missing).
///
/// `records.csv`, `summary.csv` and the plot tables are deterministic;
/// wall-clock times go to `timings.csv` only.
pub fn write_outputs(out: &BenchOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    write_json(&dir.join("config.json"), &BenchConfigFile::from_config(&out.config))?;

    let models: Vec<ModelJson> = out
        .models
        .iter()
        .map(|m| ModelJson {
            model_id: m.model_id,
            group: m.group.as_str(),
            model: m.scm.as_ref().map(ScmFile::from_scm),
            error: m.scm.is_none().then_some("model generation failed"),
        })
        .collect();
    write_json(&dir.join("models.json"), &models)?;

    let mut w = writer(dir, "records.csv")?;
    w.write_record(["model_id", "group", "n", "method", "rmse", "correct_sparsity", "correct_support"])?;
    for r in &out.records {
        let o = r.outcome;
        w.write_record([
            r.model_id.to_string(),
            r.group.as_str().to_string(),
            r.n.to_string(),
            r.method.as_str().to_string(),
            opt(o.map(|o| o.rmse)),
            o.map_or_else(String::new, |o| o.correct_sparsity.to_string()),
            o.map_or_else(String::new, |o| o.correct_support.to_string()),
        ])?;
    }
    finish(w)?;

    let mut w = writer(dir, "failures.csv")?;
    w.write_record(["model_id", "n", "method", "error"])?;
    for r in out.failures() {
        w.write_record([
            r.model_id.to_string(),
            r.n.to_string(),
            r.method.as_str().to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    finish(w)?;

    let mut w = writer(dir, "timings.csv")?;
    w.write_record(["model_id", "n", "method", "wall_time_s"])?;
    for r in &out.records {
        w.write_record([
            r.model_id.to_string(),
            r.n.to_string(),
            r.method.as_str().to_string(),
            r.wall_time.as_secs_f64().to_string(),
        ])?;
    }
    finish(w)?;

    let mut w = writer(dir, "summary.csv")?;
    w.write_record(["method", "n", "group"].into_iter().chain(SUMMARY_FIELDS))?;
    for row in out.summary() {
        let key = [row.method.as_str().to_string(), row.n.to_string(), row.group_label().to_string()];
        w.write_record(key.into_iter().chain(summary_fields(&row)))?;
    }
    finish(w)?;

    let valid = Some(AssumptionGroup::A1AndA3);
    let mut w = writer(dir, "rmse_by_n.csv")?;
    w.write_record(["method", "n", "count", "rmse_median", "rmse_q1", "rmse_q3"])?;
    for &method in &out.config.methods {
        for &n in &out.config.sample_sizes {
            let s = out.cell(method, n, valid).rmse;
            w.write_record([
                method.as_str().to_string(),
                n.to_string(),
                s.map_or(0, |s| s.count).to_string(),
                opt(s.map(|s| s.median)),
                opt(s.map(|s| s.q1)),
                opt(s.map(|s| s.q3)),
            ])?;
        }
    }
    finish(w)?;

    if out.config.methods.contains(&Method::SpaceIv) {
        let mut w = writer(dir, "sparsity_by_n.csv")?;
        w.write_record(["n", "count", "frac_correct_sparsity"])?;
        for &n in &out.config.sample_sizes {
            let row = out.cell(Method::SpaceIv, n, valid);
            w.write_record([n.to_string(), (row.runs - row.failures).to_string(), opt(row.frac_correct_sparsity)])?;
        }
        finish(w)?;
    }

    let n_max = *out.config.sample_sizes.last().expect("validated config has sample sizes");
    let mut w = writer(dir, "rmse_by_group.csv")?;
    w.write_record(["group", "method", "n", "count", "rmse_median", "rmse_q1", "rmse_q3"])?;
    for group in AssumptionGroup::ALL {
        for &method in &out.config.methods {
            let s = out.cell(method, n_max, Some(group)).rmse;
            w.write_record([
                group.as_str().to_string(),
                method.as_str().to_string(),
                n_max.to_string(),
                s.map_or(0, |s| s.count).to_string(),
                opt(s.map(|s| s.median)),
                opt(s.map(|s| s.q1)),
                opt(s.map(|s| s.q3)),
            ])?;
        }
    }
    finish(w)
}

/// JSON form of [`BenchConfig`]; missing fields take the default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BenchConfigFile {
    pub d: Option<usize>,
    pub m: Option<usize>,
    pub q: Option<usize>,
    pub n_models: Option<usize>,
    pub sample_sizes: Option<Vec<usize>>,
    pub s_max: Option<usize>,
    pub alpha: Option<f64>,
    pub methods: Option<Vec<String>>,
    pub stage_estimator: Option<String>,
    pub df_convention: Option<String>,
    pub master_seed: Option<u64>,
}

pub fn parse_estimator(s: &str) -> Result<StageEstimator> {
    match s.to_ascii_lowercase().as_str() {
        "liml" => Ok(StageEstimator::Liml),
        "tsls" => Ok(StageEstimator::Tsls),
        _ => Err(Error::Format(format!("unknown estimator {s:?} (liml or tsls)"))),
    }
}

pub fn estimator_name(e: StageEstimator) -> &'static str {
    match e {
        StageEstimator::Liml => "liml",
        StageEstimator::Tsls => "tsls",
    }
}

pub fn parse_df_convention(s: &str) -> Result<DfConvention> {
    match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "m_then_nm" | "m,n-m" => Ok(DfConvention::MThenNm),
        "nm_then_m" | "n-m,m" => Ok(DfConvention::NmThenM),
        _ => Err(Error::Format(format!("unknown df convention {s:?} (m_then_nm or nm_then_m)"))),
    }
}

pub fn df_convention_name(c: DfConvention) -> &'static str {
    match c {
        DfConvention::MThenNm => "m_then_nm",
        DfConvention::NmThenM => "nm_then_m",
    }
}

pub fn parse_method(s: &str) -> Result<Method> {
    Method::parse(s).ok_or_else(|| Error::Format(format!("unknown method {s:?}")))
}

impl BenchConfigFile {
    pub fn from_config(cfg: &BenchConfig) -> Self {
        Self {
            d: Some(cfg.d),
            m: Some(cfg.m),
            q: Some(cfg.q),
            n_models: Some(cfg.n_models),
            sample_sizes: Some(cfg.sample_sizes.clone()),
            s_max: Some(cfg.s_max),
            alpha: Some(cfg.alpha),
            methods: Some(cfg.methods.iter().map(|m| m.as_str().to_string()).collect()),
            stage_estimator: Some(estimator_name(cfg.stage_estimator).into()),
            df_convention: Some(df_convention_name(cfg.df_convention).into()),
            master_seed: Some(cfg.master_seed),
        }
    }

    pub fn apply(&self, mut cfg: BenchConfig) -> Result<BenchConfig> {
        cfg.d = self.d.unwrap_or(cfg.d);
        cfg.m = self.m.unwrap_or(cfg.m);
        cfg.q = self.q.unwrap_or(cfg.q);
        cfg.n_models = self.n_models.unwrap_or(cfg.n_models);
        if let Some(s) = &self.sample_sizes {
            cfg.sample_sizes = s.clone();
        }
        cfg.s_max = self.s_max.unwrap_or(cfg.s_max);
        cfg.alpha = self.alpha.unwrap_or(cfg.alpha);
        if let Some(ms) = &self.methods {
            cfg.methods = ms.iter().map(|m| parse_method(m)).collect::<Result<_>>()?;
        }
        if let Some(e) = &self.stage_estimator {
            cfg.stage_estimator = parse_estimator(e)?;
        }
        if let Some(c) = &self.df_convention {
            cfg.df_convention = parse_df_convention(c)?;
        }
        cfg.master_seed = self.master_seed.unwrap_or(cfg.master_seed);
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> BenchConfig {
        BenchConfig { d: 5, m: 3, n_models: 6, sample_sizes: vec![30, 60], s_max: 2, ..BenchConfig::default() }
    }

    #[test]
    fn records_are_sorted_and_complete() {
        let out = run_benchmark(&tiny()).unwrap();
        assert_eq!(out.records.len(), 6 * 2 * 4);
        let keys: Vec<_> = out.records.iter().map(|r| (r.model_id, r.n, method_rank(r.method))).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(out.records.iter().filter_map(|r| r.outcome).all(|o| o.rmse >= 0.0));
    }

    #[test]
    fn summary_counts_add_up() {
        let out = run_benchmark(&tiny()).unwrap();
        for row in out.summary().iter().filter(|r| r.group.is_none()) {
            assert_eq!(row.runs, 6);
        }
        let per_group: usize = out.group_counts().iter().map(|(_, c)| c).sum();
        assert_eq!(per_group, 6);
    }

    #[test]
    fn config_file_round_trip() {
        let cfg = BenchConfig { stage_estimator: StageEstimator::Tsls, master_seed: 9, ..tiny() };
        let file = BenchConfigFile::from_config(&cfg);
        assert_eq!(file.apply(BenchConfig::default()).unwrap(), cfg);
        let partial: BenchConfigFile = serde_json::from_str(r#"{"n_models": 3}"#).unwrap();
        assert_eq!(partial.apply(BenchConfig::default()).unwrap().n_models, 3);
        assert!(serde_json::from_str::<BenchConfigFile>(r#"{"models": 3}"#).is_err());
        let bad = BenchConfigFile { methods: Some(vec!["lasso".into()]), ..Default::default() };
        assert!(bad.apply(BenchConfig::default()).is_err());
    }
}
