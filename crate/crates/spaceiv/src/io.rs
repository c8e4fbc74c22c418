//! JSON and CSV formats.
//!
//! Index sets in reports are 1-based, matching the `X1 .. Xd` column names;
//! coefficient vectors are plain positional arrays.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use spaceiv_core::estimators::{IntersectionResult, SparsityStep};
use spaceiv_core::graph::B3Check;
use spaceiv_core::model::InstrumentLaw;
use spaceiv_core::nalgebra::{DMatrix, DVector};
use spaceiv_core::{CausalGraph, Dataset, FitResult, GraphReport, IdentReport, Node, NoiseSpec, Scm};

use crate::error::{Error, Result};

fn one_based(set: &[usize]) -> Vec<usize> {
    set.iter().map(|j| j + 1).collect()
}

fn zero_based(set: &[usize], bound: usize, what: &str) -> Result<Vec<usize>> {
    set.iter()
        .map(|&j| {
            if j == 0 || j > bound {
                Err(Error::Format(format!("{what} index {j} outside 1..={bound}")))
            } else {
                Ok(j - 1)
            }
        })
        .collect()
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Format(format!("{name} must be {nrows} x {ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InstrumentLawFile {
    #[default]
    StandardNormal,
    UnitVectors,
}

fn default_one() -> f64 {
    1.0
}

fn default_dim() -> usize {
    1
}

/// Noise block of a model file. Missing vectors default to all ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseFile {
    #[serde(default = "default_dim")]
    pub confounder_dim: usize,
    #[serde(default)]
    pub loading_x: Option<Vec<f64>>,
    #[serde(default = "default_one")]
    pub loading_y: f64,
    #[serde(default)]
    pub eps_x_scale: Option<Vec<f64>>,
    #[serde(default = "default_one")]
    pub eps_y_scale: f64,
    #[serde(default)]
    pub instruments: InstrumentLawFile,
}

/// Linear SCM: `B[j][i]` is the coefficient of `X_i` in the equation of `X_j`,
/// `A[j][k]` that of instrument `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmFile {
    pub d: usize,
    pub m: usize,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseFile>,
}

impl ScmFile {
    pub fn from_scm(scm: &Scm) -> Self {
        let noise = scm.noise();
        Self {
            d: scm.d(),
            m: scm.m(),
            b: matrix_rows(scm.b()),
            a: matrix_rows(scm.a()),
            beta: scm.beta_star().iter().copied().collect(),
            noise: Some(NoiseFile {
                confounder_dim: noise.confounder_dim,
                loading_x: Some(noise.confounder_loading_x.iter().copied().collect()),
                loading_y: noise.confounder_loading_y,
                eps_x_scale: Some(noise.eps_x_scale.iter().copied().collect()),
                eps_y_scale: noise.eps_y_scale,
                instruments: match noise.instrument_law {
                    InstrumentLaw::StandardNormal => InstrumentLawFile::StandardNormal,
                    InstrumentLaw::UnitVectors => InstrumentLawFile::UnitVectors,
                },
            }),
        }
    }

    pub fn to_scm(&self) -> Result<Scm> {
        let (d, m) = (self.d, self.m);
        let b = matrix_from_rows(&self.b, d, d, "B")?;
        let a = matrix_from_rows(&self.a, d, m, "A")?;
        if self.beta.len() != d {
            return Err(Error::Format(format!("beta must have length {d}")));
        }
        let beta = DVector::from_column_slice(&self.beta);
        let noise = match &self.noise {
            None => NoiseSpec::standard(d),
            Some(f) => {
                let vector = |v: &Option<Vec<f64>>, name: &str| match v {
                    None => Ok(DVector::from_element(d, 1.0)),
                    Some(v) if v.len() == d => Ok(DVector::from_column_slice(v)),
                    Some(_) => Err(Error::Format(format!("noise.{name} must have length {d}"))),
                };
                NoiseSpec {
                    confounder_dim: f.confounder_dim,
                    confounder_loading_x: vector(&f.loading_x, "loading_x")?,
                    confounder_loading_y: f.loading_y,
                    eps_x_scale: vector(&f.eps_x_scale, "eps_x_scale")?,
                    eps_y_scale: f.eps_y_scale,
                    instrument_law: match f.instruments {
                        InstrumentLawFile::StandardNormal => InstrumentLaw::StandardNormal,
                        InstrumentLawFile::UnitVectors => InstrumentLaw::UnitVectors,
                    },
                }
            }
        };
        Ok(Scm::new(b, a, beta, noise)?)
    }
}

/// Graph given by labelled edges such as `["I1", "X8"]`; `pa_y` adds `Xj -> Y` edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub m: usize,
    pub d: usize,
    pub edges: Vec<[String; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pa_y: Vec<usize>,
}

impl GraphFile {
    pub fn from_graph(g: &CausalGraph) -> Self {
        Self {
            m: g.instrument_count(),
            d: g.predictor_count(),
            edges: g.edges().into_iter().map(|(u, v)| [u.to_string(), v.to_string()]).collect(),
            pa_y: Vec::new(),
        }
    }

    pub fn to_graph(&self) -> Result<CausalGraph> {
        let mut g = CausalGraph::new(self.m, self.d);
        for [u, v] in &self.edges {
            let parse = |s: &str| s.parse::<Node>().map_err(|_| Error::Format(format!("bad node label {s:?}")));
            g.add_edge(parse(u)?, parse(v)?)?;
        }
        for j in zero_based(&self.pa_y, self.d, "pa_y")? {
            if !g.has_edge(Node::Predictor(j), Node::Response) {
                g.add_edge(Node::Predictor(j), Node::Response)?;
            }
        }
        Ok(g)
    }
}

/// Either kind of model description accepted by `check`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelFile {
    Scm(ScmFile),
    Graph(GraphFile),
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(Error::io(path))
}

pub fn read_scm(path: &Path) -> Result<Scm> {
    read_json::<ScmFile>(path)?.to_scm()
}

/// Writes `I1..Im, X1..Xd, Y` columns with shortest round-trip formatting.
pub fn write_dataset<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<String> = (1..=data.m())
        .map(|k| format!("I{k}"))
        .chain((1..=data.d()).map(|j| format!("X{j}")))
        .chain(["Y".to_string()])
        .collect();
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for r in 0..data.n() {
        row.clear();
        row.extend(data.instruments().row(r).iter().map(f64::to_string));
        row.extend(data.x().row(r).iter().map(f64::to_string));
        row.push(data.y()[r].to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

/// Reads a dataset whose header names instruments `I*`, predictors `X*` and one `Y`,
/// in that order.
pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = r.headers()?.clone();
    let m = header.iter().take_while(|h| h.starts_with('I')).count();
    let d = header.iter().skip(m).take_while(|h| h.starts_with('X')).count();
    if m == 0 || d == 0 || header.len() != m + d + 1 || &header[m + d] != "Y" {
        return Err(Error::Format("header must be I1..Im, X1..Xd, Y".into()));
    }
    let mut values = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        for field in record.iter() {
            let v: f64 =
                field.parse().map_err(|_| Error::Format(format!("row {}: {field:?} is not a number", line + 1)))?;
            values.push(v);
        }
    }
    let width = m + d + 1;
    let n = values.len() / width;
    let table = DMatrix::from_row_slice(n, width, &values);
    let i = table.columns(0, m).into_owned();
    let x = table.columns(m, d).into_owned();
    let y = table.column(m + d).into_owned();
    Ok(Dataset::new(x, i, y)?)
}

pub fn read_dataset_file(path: &Path) -> Result<Dataset> {
    read_dataset(fs::File::open(path).map_err(Error::io(path))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepJson {
    pub s: usize,
    pub support: Vec<usize>,
    pub statistic: f64,
    pub threshold: f64,
    pub accepted: bool,
    pub failed_subsets: usize,
}

impl From<&SparsityStep> for StepJson {
    fn from(step: &SparsityStep) -> Self {
        Self {
            s: step.s,
            support: one_based(&step.support),
            statistic: step.statistic,
            threshold: step.threshold,
            accepted: step.accepted,
            failed_subsets: step.failed_subsets,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitJson {
    pub beta: Vec<f64>,
    pub support: Vec<usize>,
    pub statistic: f64,
    pub threshold: Option<f64>,
    pub accepted: bool,
    pub model_violation_warning: bool,
    pub path: Vec<StepJson>,
}

impl From<&FitResult> for FitJson {
    fn from(fit: &FitResult) -> Self {
        Self {
            beta: fit.beta_hat.iter().copied().collect(),
            support: one_based(&fit.support),
            statistic: fit.statistic,
            threshold: fit.threshold,
            accepted: fit.accepted,
            model_violation_warning: fit.model_violation_warning,
            path: fit.sparsity_path.iter().map(StepJson::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionJson {
    pub set: Vec<usize>,
    pub size: Option<usize>,
    pub accepted_sets: Vec<Vec<usize>>,
}

impl From<&IntersectionResult> for IntersectionJson {
    fn from(r: &IntersectionResult) -> Self {
        Self {
            set: one_based(&r.set),
            size: r.size,
            accepted_sets: r.accepted_sets.iter().map(|s| one_based(s)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentJson {
    pub pa_y: Vec<usize>,
    #[serde(rename = "A1")]
    pub a1: bool,
    pub a1_rank: usize,
    #[serde(rename = "A2")]
    pub a2: bool,
    pub a2_max_size: usize,
    pub a2_witness: Option<Vec<usize>>,
    #[serde(rename = "A3")]
    pub a3: bool,
    pub a3_witness: Option<Vec<usize>>,
    pub identifiable_coordinates: Vec<usize>,
    pub solution_space_dim: usize,
}

impl From<&IdentReport> for IdentJson {
    fn from(r: &IdentReport) -> Self {
        Self {
            pa_y: one_based(&r.pa_y),
            a1: r.a1,
            a1_rank: r.a1_rank,
            a2: r.a2,
            a2_max_size: r.a2_max_size,
            a2_witness: r.a2_witness.as_deref().map(one_based),
            a3: r.a3,
            a3_witness: r.a3_witness.as_deref().map(one_based),
            identifiable_coordinates: r
                .per_coordinate
                .iter()
                .enumerate()
                .filter(|(_, &ok)| ok)
                .map(|(j, _)| j + 1)
                .collect(),
            solution_space_dim: r.solution_space_dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct B3Json {
    pub set: Vec<usize>,
    pub ancestors_differ: bool,
    pub cut_size: usize,
    pub cut: Vec<String>,
}

impl From<&B3Check> for B3Json {
    fn from(c: &B3Check) -> Self {
        Self {
            set: one_based(&c.set),
            ancestors_differ: c.ancestors_differ,
            cut_size: c.cut_size,
            cut: c.cut.iter().map(Node::to_string).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub pa_y: Vec<usize>,
    #[serde(rename = "B1")]
    pub b1: bool,
    pub b1_paths: usize,
    pub b1_cut: Vec<String>,
    #[serde(rename = "B3")]
    pub b3: bool,
    pub b3_checks: Vec<B3Json>,
    pub b3_witness: Option<B3Json>,
}

impl From<&GraphReport> for GraphJson {
    fn from(r: &GraphReport) -> Self {
        Self {
            pa_y: one_based(&r.pa_y),
            b1: r.b1,
            b1_paths: r.b1_paths,
            b1_cut: r.b1_cut.iter().map(Node::to_string).collect(),
            b3: r.b3,
            b3_checks: r.b3_checks.iter().map(B3Json::from).collect(),
            b3_witness: r.b3_witness.as_ref().map(B3Json::from),
        }
    }
}
