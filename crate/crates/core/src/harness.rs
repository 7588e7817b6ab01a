//! Experiment configuration, seeded Monte Carlo and persistence.
//!
//! A configuration is a TOML file:
//!
//! ```toml
//! means = [1.0, 0.0]
//! delta = [0.1, 0.01]      # or a single number
//! replications = 200
//! seed = 7
//! round_cap = 10000000     # optional
//! workers = 4              # optional, defaults to all cores
//!
//! [family]
//! kind = "gaussian"        # or "bernoulli" (sigma2 is then ignored)
//! sigma2 = 1.0
//! box = [-1.0, 2.0]
//!
//! [problem]
//! kind = "bai"             # or "eps_bai" with `epsilon = 0.1`
//!
//! [algorithm]
//! name = "tas"             # or "stas"
//! mode = "projected"       # or "raw"
//! order = [0, 1]           # optional sticky order
//! d_k = 2.0                # optional region constant
//!
//! [diagnostics]
//! good_event_window = 36   # optional
//! trajectory_stride = 100  # optional
//!
//! [bounds]
//! upper = true             # compute the theorem upper bound per delta
//! eps_mu = 0.01            # optional
//!
//! [output]
//! runs = "runs.jsonl"      # optional
//! summary = "summary.csv"  # optional
//! format = "csv"           # summary format, "csv" or "jsonl"
//! ```
//!
//! Unknown keys are rejected.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{run_with_stream, validate_inputs, AlgoConfig, Algorithm, Diagnostics, MeanMode, RunRecord, RunStatus, DEFAULT_ROUND_CAP};
use crate::bounds::{theorem_bound, BoundInputs, Variant};
use crate::error::{Error, Result};
use crate::exp_family::{FamilyKind, FamilySpec};
use crate::oracle::{self, OracleConfig};
use crate::problems::{BanditModel, ProblemInstance, ProblemKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub kind: FamilyKind,
    #[serde(default = "unit_variance")]
    pub sigma2: f64,
    #[serde(rename = "box")]
    pub mean_box: [f64; 2],
}

fn unit_variance() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub name: Algorithm,
    #[serde(default)]
    pub mode: MeanMode,
    #[serde(default)]
    pub order: Option<Vec<usize>>,
    #[serde(default)]
    pub d_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default)]
    pub good_event_window: Option<u64>,
    #[serde(default)]
    pub trajectory_stride: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(default = "yes")]
    pub upper: bool,
    #[serde(default)]
    pub eps_mu: Option<f64>,
    #[serde(default)]
    pub d_k_override: Option<f64>,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self { upper: true, eps_mu: None, d_k_override: None }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SummaryFormat {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub runs: Option<PathBuf>,
    #[serde(default)]
    pub summary: Option<PathBuf>,
    #[serde(default)]
    pub format: SummaryFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaSpec {
    One(f64),
    Sweep(Vec<f64>),
}

impl DeltaSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            DeltaSpec::One(d) => vec![*d],
            DeltaSpec::Sweep(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: FamilyConfig,
    pub means: Vec<f64>,
    pub problem: ProblemKind,
    pub algorithm: AlgorithmConfig,
    pub delta: DeltaSpec,
    #[serde(default = "one")]
    pub replications: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_cap")]
    pub round_cap: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> u64 {
    1
}

fn default_cap() -> u64 {
    DEFAULT_ROUND_CAP
}

/// A validated configuration, ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub problem: ProblemInstance,
    pub model: BanditModel,
    pub deltas: Vec<f64>,
    /// Algorithm configuration with `D_K` resolved.
    pub algo: AlgoConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Validates every field and resolves `D_K` when needed. No sampling
    /// happens here.
    pub fn build(&self) -> Result<Experiment> {
        let cfg_err = |e: Error| match e {
            Error::Domain(m) | Error::Degenerate(m) | Error::Precondition(m) => Error::Config(m),
            other => other,
        };
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        let deltas = self.delta.values();
        if deltas.is_empty() {
            return Err(Error::Config("delta sweep is empty".into()));
        }
        if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
            return Err(Error::Config(format!("delta must be in (0, 1), got {d}")));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        let [lo, hi] = self.family.mean_box;
        let family = FamilySpec::new(self.family.kind, self.family.sigma2, lo, hi).map_err(cfg_err)?;
        let problem = ProblemInstance::new(family, self.means.len(), self.problem).map_err(cfg_err)?;
        let model = BanditModel::new(self.means.clone()).map_err(cfg_err)?;
        if let Some(m) = self.means.iter().find(|m| !family.bounds().contains(**m)) {
            return Err(Error::Config(format!("mean {m} lies outside the box [{lo}, {hi}]")));
        }
        problem.i_star(&model).map_err(cfg_err)?;
        let mut algo = AlgoConfig::new(self.algorithm.name);
        algo.mode = self.algorithm.mode;
        algo.order = self.algorithm.order.clone();
        algo.d_k = self.algorithm.d_k;
        algo.round_cap = self.round_cap;
        algo.diagnostics = Diagnostics {
            good_event_window: self.diagnostics.good_event_window,
            trajectory_stride: self.diagnostics.trajectory_stride,
        };
        for &d in &deltas {
            validate_inputs(&problem, &model, &algo, d).map_err(cfg_err)?;
        }
        let algo = algo.resolved(problem.arms())?;
        Ok(Experiment { config: self.clone(), problem, model, deltas, algo })
    }
}

/// One replication: stream `index` of the generator seeded with the base
/// seed, so adding replications leaves earlier ones unchanged.
pub fn run_once(exp: &Experiment, delta: f64, index: u64) -> Result<RunRecord> {
    run_with_stream(&exp.problem, &exp.model, &exp.algo, delta, exp.config.seed, index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub delta: f64,
    pub replications: u64,
    pub mean_tau: f64,
    /// Standard error of `mean_tau` from the sample variance.
    pub se_tau: f64,
    /// Stopped runs whose recommendation is wrong.
    pub errors: u64,
    pub err_rate: f64,
    pub min_tau: u64,
    pub max_tau: u64,
    pub non_stopped: u64,
    pub aborted: u64,
    /// `mean_tau / ln(1/δ)`.
    pub ratio: f64,
    /// `T* ln(1/(2.4δ))`.
    pub lower_bound: f64,
    pub upper_bound: Option<f64>,
    /// Some replication aborted.
    pub incomplete: bool,
}

/// Summary of the records of one `δ`, in the given order.
pub fn summarize(records: &[RunRecord], delta: f64, lower_bound: f64, upper_bound: Option<f64>) -> McSummary {
    let n = records.len() as u64;
    let taus: Vec<f64> = records.iter().map(|r| r.stopping_time as f64).collect();
    let mean = taus.iter().sum::<f64>() / n.max(1) as f64;
    let var = if n > 1 { taus.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    let errors = records.iter().filter(|r| r.stopped() && !r.correct).count() as u64;
    let aborted = records.iter().filter(|r| matches!(r.status, RunStatus::Aborted(_))).count() as u64;
    McSummary {
        delta,
        replications: n,
        mean_tau: mean,
        se_tau: (var / n.max(1) as f64).sqrt(),
        errors,
        err_rate: errors as f64 / n.max(1) as f64,
        min_tau: records.iter().map(|r| r.stopping_time).min().unwrap_or(0),
        max_tau: records.iter().map(|r| r.stopping_time).max().unwrap_or(0),
        non_stopped: records.iter().filter(|r| !r.stopped()).count() as u64,
        aborted,
        ratio: mean / (1.0 / delta).ln(),
        lower_bound,
        upper_bound,
        incomplete: aborted > 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    /// Grouped by `δ` in sweep order, replication index ascending.
    pub records: Vec<RunRecord>,
    pub summaries: Vec<McSummary>,
}

/// `T* ln(1/(2.4δ))` and, when enabled, the theorem upper bound.
pub fn delta_bounds(exp: &Experiment, delta: f64) -> Result<(f64, Option<f64>)> {
    let sol = oracle::solve(&exp.problem, &exp.model, &OracleConfig::default())?;
    let lower = oracle::char_time_lower_bound(sol.t_star_inv, delta)?;
    if !exp.config.bounds.upper {
        return Ok((lower, None));
    }
    let mut inputs = BoundInputs::new(exp.problem, exp.model.clone());
    inputs.d_k_override = exp.config.bounds.d_k_override;
    inputs.eps_mu = exp.config.bounds.eps_mu;
    let variant = match exp.algo.algorithm {
        Algorithm::Tas => Variant::Tas,
        Algorithm::Stas => Variant::Stas,
    };
    // Out-of-range instances (e.g. raw mode on the box edge) have no bound.
    let upper = theorem_bound(&inputs, delta, variant, exp.algo.mode == MeanMode::Raw).ok().map(|r| r.upper_bound);
    Ok((lower, upper))
}

/// Runs every replication at every `δ` on `workers` threads (all cores when
/// `None`). Records are collected in index order, so the result does not
/// depend on scheduling.
pub fn monte_carlo(exp: &Experiment, workers: Option<usize>) -> Result<McResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.or(exp.config.workers).unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for &delta in &exp.deltas {
        let batch: Vec<RunRecord> = pool.install(|| {
            (0..exp.config.replications)
                .into_par_iter()
                .map(|i| run_once(exp, delta, i))
                .collect::<Result<Vec<_>>>()
        })?;
        let (lower, upper) = delta_bounds(exp, delta)?;
        summaries.push(summarize(&batch, delta, lower, upper));
        records.extend(batch);
    }
    Ok(McResult { records, summaries })
}

// ---------------------------------------------------------------------------
// Persistence

/// Appends one JSON record per line.
pub fn append_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = BufWriter::new(file);
    write_jsonl(&mut w, items)?;
    w.flush()?;
    Ok(())
}

pub fn write_jsonl<T: Serialize, W: Write>(w: &mut W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut *w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads every non-empty line of a JSONL file.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Fixed summary columns, in order.
pub const CSV_COLUMNS: [&str; 8] =
    ["delta", "replications", "mean_tau", "se_tau", "err_rate", "ratio", "lower_bound", "upper_bound"];

#[derive(Serialize)]
struct CsvRow {
    delta: f64,
    replications: u64,
    mean_tau: f64,
    se_tau: f64,
    err_rate: f64,
    ratio: f64,
    lower_bound: f64,
    upper_bound: Option<f64>,
}

pub fn write_csv<W: Write>(w: W, summaries: &[McSummary]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for s in summaries {
        out.serialize(CsvRow {
            delta: s.delta,
            replications: s.replications,
            mean_tau: s.mean_tau,
            se_tau: s.se_tau,
            err_rate: s.err_rate,
            ratio: s.ratio,
            lower_bound: s.lower_bound,
            upper_bound: s.upper_bound,
        })?;
    }
    out.flush()?;
    Ok(())
}

/// Writes records and summaries to the paths named in the configuration.
pub fn write_outputs(exp: &Experiment, result: &McResult) -> Result<()> {
    let out = &exp.config.output;
    if let Some(p) = &out.runs {
        append_jsonl(p, &result.records)?;
    }
    if let Some(p) = &out.summary {
        match out.format {
            SummaryFormat::Csv => write_csv(File::create(p)?, &result.summaries)?,
            SummaryFormat::Jsonl => {
                let mut w = BufWriter::new(File::create(p)?);
                write_jsonl(&mut w, &result.summaries)?;
                w.flush()?;
            }
        }
    }
    Ok(())
}
