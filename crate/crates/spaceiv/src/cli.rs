//! Command-line interface.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use spaceiv_core::bench::{BenchConfig, Method};
use spaceiv_core::estimators::{ols_sparse, space_iv, subset_intersection, IntersectionMode};
use spaceiv_core::identifiability::{identify, IdentOptions};
use spaceiv_core::model::sample_dataset;
use spaceiv_core::{CausalGraph, TestConfig};

use crate::bench::{parse_df_convention, parse_estimator, parse_method, run_benchmark, write_outputs, BenchConfigFile};
use crate::error::{Error, Result};
use crate::genericity::{genericity, Genericity};
use crate::io::{
    read_dataset_file, read_json, read_scm, write_dataset, FitJson, GraphJson, IdentJson, IntersectionJson, ModelFile,
};

#[derive(Debug, Parser)]
#[command(name = "spaceiv", version, about = "Sparse causal effect estimation with instrumental variables")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a data set from a model file and write it as CSV.
    Simulate(SimulateArgs),
    /// Check identifiability conditions of a model or graph.
    Check(CheckArgs),
    /// Estimate a sparse causal effect from a CSV data set.
    Fit(FitArgs),
    /// Intersect all accepted supports of a given size.
    Subset(SubsetArgs),
    /// Run the random-model benchmark.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model JSON.
    pub model: PathBuf,
    #[arg(short, long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file (stdout if omitted).
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Model JSON or graph JSON.
    pub model: PathBuf,
    /// Check the graphical conditions B1 and B3.
    #[arg(long)]
    pub graphical: bool,
    /// Classify this many random coefficient draws on the model's graph.
    #[arg(long, value_name = "R")]
    pub monte_carlo: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print the graph in Graphviz format instead of a report.
    #[arg(long)]
    pub dot: bool,
    #[arg(long, default_value_t = 3)]
    pub a2_max_size: usize,
    /// Allow sweeps above the size guard.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 3)]
    pub smax: usize,
    /// liml or tsls.
    #[arg(long, default_value = "liml")]
    pub estimator: String,
    /// m_then_nm or nm_then_m.
    #[arg(long, default_value = "m_then_nm")]
    pub df_convention: String,
    /// Test the empty support first.
    #[arg(long)]
    pub test_empty: bool,
    /// Center every column before fitting.
    #[arg(long)]
    pub center: bool,
}

impl TestArgs {
    fn config(&self) -> Result<TestConfig> {
        Ok(TestConfig {
            alpha: self.alpha,
            s_max: self.smax,
            stage_estimator: parse_estimator(&self.estimator)?,
            df_convention: parse_df_convention(&self.df_convention)?,
            test_empty_support: self.test_empty,
            center: self.center,
        })
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV data set with columns I1..Im, X1..Xd, Y.
    pub data: PathBuf,
    #[command(flatten)]
    pub test: TestArgs,
    /// spaceIV or OLS-sparse.
    #[arg(long, default_value = "spaceIV")]
    pub method: String,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("mode").required(true).args(["size", "minimal"])))]
pub struct SubsetArgs {
    pub data: PathBuf,
    #[command(flatten)]
    pub test: TestArgs,
    #[arg(long)]
    pub size: Option<usize>,
    /// Use the smallest size with an accepted support.
    #[arg(long)]
    pub minimal: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Benchmark configuration JSON; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// 2000 models instead of 200.
    #[arg(long)]
    pub full: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub models: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub smax: Option<usize>,
    #[arg(long)]
    pub estimator: Option<String>,
    #[arg(long)]
    pub df_convention: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Worker threads (all cores if omitted).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

impl BenchArgs {
    pub fn config(&self) -> Result<BenchConfig> {
        let base = if self.full { BenchConfig::full() } else { BenchConfig::default() };
        let mut cfg = match &self.config {
            Some(path) => read_json::<BenchConfigFile>(path)?.apply(base)?,
            None => base,
        };
        let flags = BenchConfigFile {
            n_models: self.models,
            sample_sizes: self.sizes.clone(),
            s_max: self.smax,
            alpha: self.alpha,
            methods: self.methods.clone(),
            stage_estimator: self.estimator.clone(),
            df_convention: self.df_convention.clone(),
            master_seed: self.seed,
            ..Default::default()
        };
        cfg = flags.apply(cfg)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_json<T: Serialize, W: Write>(out: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out).map_err(Error::io("<stdout>"))
}

#[derive(Serialize)]
struct GraphCheckJson {
    #[serde(flatten)]
    report: GraphJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    genericity: Option<Genericity>,
}

#[derive(Serialize)]
struct IdentCheckJson {
    #[serde(flatten)]
    report: IdentJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    genericity: Option<Genericity>,
}

fn simulate<W: Write>(args: &SimulateArgs, out: &mut W) -> Result<()> {
    let scm = read_scm(&args.model)?;
    let data = sample_dataset(&scm, args.n, args.seed)?;
    match &args.out {
        Some(path) => write_dataset(&data, fs::File::create(path).map_err(Error::io(path))?),
        None => write_dataset(&data, out),
    }
}

fn check<W: Write>(args: &CheckArgs, out: &mut W) -> Result<()> {
    let (graph, scm) = match read_json::<ModelFile>(&args.model)? {
        ModelFile::Graph(g) => (g.to_graph()?, None),
        ModelFile::Scm(s) => {
            let scm = s.to_scm()?;
            (CausalGraph::from_scm(&scm, 0.0)?, Some(scm))
        }
    };
    if args.dot {
        return out.write_all(graph.to_dot().as_bytes()).map_err(Error::io("<stdout>"));
    }
    let mc = args.monte_carlo.map(|r| genericity(&graph, r, args.seed)).transpose()?;
    match scm {
        Some(scm) if !args.graphical => {
            let opts = IdentOptions { a2_max_size: args.a2_max_size, force: args.force, ..IdentOptions::default() };
            let report = identify(&scm, &opts)?;
            print_json(out, &IdentCheckJson { report: IdentJson::from(&report), genericity: mc })
        }
        _ => {
            let report = graph.check_b_conditions(args.force)?;
            print_json(out, &GraphCheckJson { report: GraphJson::from(&report), genericity: mc })
        }
    }
}

fn fit<W: Write>(args: &FitArgs, out: &mut W) -> Result<()> {
    let data = read_dataset_file(&args.data)?;
    let cfg = args.test.config()?;
    let result = match parse_method(&args.method)? {
        Method::SpaceIv => space_iv(&data, &cfg)?,
        Method::OlsSparse => ols_sparse(&data, cfg.s_max)?,
        m => return Err(Error::Format(format!("{} needs the true model and is only available in bench", m.as_str()))),
    };
    print_json(out, &FitJson::from(&result))
}

fn subset<W: Write>(args: &SubsetArgs, out: &mut W) -> Result<()> {
    let data = read_dataset_file(&args.data)?;
    let mode = match args.size {
        Some(k) => IntersectionMode::FixedSize(k),
        None => IntersectionMode::Minimal,
    };
    let result = subset_intersection(&data, &args.test.config()?, mode)?;
    print_json(out, &IntersectionJson::from(&result))
}

#[derive(Serialize)]
struct BenchDone<'a> {
    out: &'a Path,
    models: usize,
    records: usize,
    failures: usize,
    groups: std::collections::BTreeMap<&'static str, usize>,
}

fn bench<W: Write>(args: &BenchArgs, out: &mut W) -> Result<()> {
    let cfg = args.config()?;
    let result = match args.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Format(e.to_string()))?
            .install(|| run_benchmark(&cfg))?,
        None => run_benchmark(&cfg)?,
    };
    write_outputs(&result, &args.out)?;
    print_json(
        out,
        &BenchDone {
            out: &args.out,
            models: result.models.len(),
            records: result.records.len(),
            failures: result.failures().count(),
            groups: result.group_counts().iter().map(|(g, c)| (g.as_str(), *c)).collect(),
        },
    )
}

/// Runs one parsed command, writing its main output to `out`.
pub fn run<W: Write>(cli: &Cli, out: &mut W) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a, out),
        Command::Check(a) => check(a, out),
        Command::Fit(a) => fit(a, out),
        Command::Subset(a) => subset(a, out),
        Command::Bench(a) => bench(a, out),
    }
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: &'a str,
    message: String,
}

/// Entry point: returns the process exit code. Failures print
/// `{"error": kind, "message": ...}` on stderr.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let msg = ErrorJson { error: "usage", message: e.to_string().trim_end().to_string() };
            eprintln!("{}", serde_json::to_string(&msg).unwrap_or_default());
            return 2;
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let msg = ErrorJson { error: e.kind(), message: e.to_string() };
            eprintln!("{}", serde_json::to_string(&msg).unwrap_or_default());
            1
        }
    }
}
