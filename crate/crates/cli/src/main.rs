//! `tas`: command-line front end for the experiment harness.
//!
//! Exit codes: 0 on success, 1 on invalid input or usage, 2 on run-time
//! failure.

use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use tas_core::algorithms::{self, Algorithm, MeanMode};
use tas_core::bounds::{theorem_bound, BoundInputs, Variant};
use tas_core::harness::{self, Experiment, ExperimentConfig};
use tas_core::oracle::{self, OracleConfig};
use tas_core::tracking::linf_project;
use tas_core::{Error, FamilySpec, ProblemInstance, ProblemKind};

/// Default good-event window when `--diag-good-event` is given without one in
/// the configuration.
const GOOD_EVENT_WINDOW: u64 = 36;

#[derive(Parser, Debug)]
#[command(name = "tas", version, about = "Track-and-Stop experiments for pure-exploration bandits")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replaces the configured δ sweep with a single value.
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    replications: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format; human-readable text when absent (CSV for `mc`).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Record the good-event diagnostic.
    #[arg(long, global = true)]
    diag_good_event: bool,
    /// Replaces the solved D_K, in the algorithm and in the bounds.
    #[arg(long, global = true)]
    dk_override: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the characteristic-time game at the configured means.
    Oracle,
    /// One seeded run.
    Run {
        /// Replication index (generator stream).
        #[arg(long, default_value_t = 0)]
        index: u64,
        /// Record a trajectory point every N rounds.
        #[arg(long)]
        trajectory: Option<u64>,
    },
    /// Monte-Carlo sweep over δ; one summary row per δ.
    Mc {
        /// Append run records (JSONL) here, in addition to the configured path.
        #[arg(long)]
        runs: Option<PathBuf>,
    },
    /// Non-asymptotic bound report per δ.
    Bounds {
        /// ε_μ for S-TaS; probed when absent.
        #[arg(long)]
        eps_mu: Option<f64>,
    },
    /// ℓ∞ projection onto the clipped simplex.
    Project {
        /// Comma-separated weights.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        weights: Vec<f64>,
        #[arg(long)]
        eps: f64,
    },
    /// Quick invariant checks.
    Selftest,
}

/// A failure tagged with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<Error>() {
            Some(e) if e.is_validation() => 1,
            _ => 2,
        };
        Self { code, error }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn validation(msg: impl Into<String>) -> Failure {
    Failure { code: 1, error: Error::Config(msg.into()).into() }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Oracle => cmd_oracle(cli),
        Command::Run { index, trajectory } => cmd_run(cli, *index, *trajectory),
        Command::Mc { runs } => cmd_mc(cli, runs.as_ref()),
        Command::Bounds { eps_mu } => cmd_bounds(cli, *eps_mu),
        Command::Project { weights, eps } => cmd_project(cli, weights, *eps),
        Command::Selftest => cmd_selftest(cli),
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| validation("--config is required"))?;
    let text = std::fs::read_to_string(path).map_err(|e| validation(format!("reading {}: {e}", path.display())))?;
    let mut c = ExperimentConfig::from_toml_str(&text)?;
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(d) = cli.delta {
        c.delta = harness::DeltaSpec::One(d);
    }
    if let Some(r) = cli.replications {
        c.replications = r;
    }
    if let Some(w) = cli.workers {
        c.workers = Some(w);
    }
    if cli.diag_good_event && c.diagnostics.good_event_window.is_none() {
        c.diagnostics.good_event_window = Some(GOOD_EVENT_WINDOW);
    }
    if let Some(d) = cli.dk_override {
        c.algorithm.d_k = Some(d);
        c.bounds.d_k_override = Some(d);
    }
    Ok(c)
}

fn build(cli: &Cli) -> Result<Experiment, Failure> {
    Ok(load_config(cli)?.build()?)
}

/// Writes to `--out` (appending) or standard output.
fn emit(cli: &Cli, text: &str) -> Result<(), Failure> {
    let res = match &cli.out {
        Some(p) => OpenOptions::new()
            .create(true)
            .append(true)
            .open(p)
            .and_then(|mut f| f.write_all(text.as_bytes()))
            .with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing to stdout"),
    };
    res.map_err(|error| Failure { code: 2, error })
}

fn json_line<T: serde::Serialize>(v: &T) -> Result<String, Failure> {
    Ok(serde_json::to_string(v).map_err(Error::from)? + "\n")
}

fn reject_csv(cli: &Cli, what: &str) -> Result<(), Failure> {
    if cli.format == Some(Format::Csv) {
        return Err(validation(format!("{what} has no CSV output")));
    }
    Ok(())
}

fn cmd_oracle(cli: &Cli) -> Result<(), Failure> {
    reject_csv(cli, "oracle")?;
    let exp = build(cli)?;
    let sol = oracle::solve(&exp.problem, &exp.model, &exp.algo.oracle)?;
    let text = match cli.format {
        Some(_) => json_line(&sol)?,
        None => {
            let (rep, w) = sol.representative();
            let mut s = format!("t_star_inv = {:.12}\nt_star = {:.12}\n", sol.t_star_inv, 1.0 / sol.t_star_inv);
            s += &format!("furthest_answers = {:?}\n", sol.i_f);
            s += &format!("weights[{rep}] = {w:?}\n");
            s += &format!("d_values = {:?}\ngap = {:.3e}\n", sol.d_values, sol.gap);
            s
        }
    };
    emit(cli, &text)
}

fn cmd_run(cli: &Cli, index: u64, trajectory: Option<u64>) -> Result<(), Failure> {
    reject_csv(cli, "run")?;
    let mut exp = build(cli)?;
    if trajectory.is_some() {
        exp.algo.diagnostics.trajectory_stride = trajectory;
    }
    let delta = exp.deltas[0];
    let record = harness::run_once(&exp, delta, index)?;
    let text = match cli.format {
        Some(_) => json_line(&record)?,
        None => format!(
            "status = {:?}\nstopping_time = {}\nrecommendation = {}\ncorrect = {}\ncounts = {:?}\nanswer_switches = {}\n",
            record.status,
            record.stopping_time,
            record.recommendation,
            record.correct,
            record.counts,
            record.answer_switches()
        ),
    };
    emit(cli, &text)
}

fn cmd_mc(cli: &Cli, runs: Option<&PathBuf>) -> Result<(), Failure> {
    let exp = build(cli)?;
    let result = harness::monte_carlo(&exp, cli.workers)?;
    harness::write_outputs(&exp, &result)?;
    if let Some(p) = runs {
        harness::append_jsonl(p, &result.records)?;
    }
    let text = match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            harness::write_csv(&mut buf, &result.summaries)?;
            String::from_utf8(buf).expect("CSV is UTF-8")
        }
        Format::Jsonl => {
            let mut buf = Vec::new();
            harness::write_jsonl(&mut buf, &result.summaries)?;
            String::from_utf8(buf).expect("JSON is UTF-8")
        }
    };
    emit(cli, &text)?;
    if result.summaries.iter().any(|s| s.incomplete) {
        eprintln!("warning: some replications aborted");
    }
    Ok(())
}

fn cmd_bounds(cli: &Cli, eps_mu: Option<f64>) -> Result<(), Failure> {
    reject_csv(cli, "bounds")?;
    let exp = build(cli)?;
    let mut inputs = BoundInputs::new(exp.problem, exp.model.clone());
    inputs.d_k_override = exp.config.bounds.d_k_override;
    inputs.eps_mu = eps_mu.or(exp.config.bounds.eps_mu);
    let variant = match exp.algo.algorithm {
        Algorithm::Tas => Variant::Tas,
        Algorithm::Stas => Variant::Stas,
    };
    let mut text = String::new();
    for &delta in &exp.deltas {
        let r = theorem_bound(&inputs, delta, variant, exp.algo.mode == MeanMode::Raw)?;
        match cli.format {
            Some(_) => text += &json_line(&r)?,
            None => {
                let opt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6e}"));
                text += &format!("delta = {}\n", r.delta);
                text += &format!("  D_K = {:.6e}\n  L = {:.6}\n  D = {:.6}\n  F = {:.6}\n", r.d_k, r.l, r.d, r.f);
                text += &format!("  t_star_inv = {:.12}\n", r.t_star_inv);
                text += &format!("  T_M = {}\n  T_mu = {}\n  eps_mu = {}\n", opt(r.t_m), opt(r.t_mu), opt(r.eps_mu));
                text += &format!("  T0 = {:.6e}\n  upper_bound = {:.6e}\n  lower_bound = {:.6}\n", r.t0, r.upper_bound, r.lower_bound);
            }
        }
    }
    emit(cli, &text)
}

fn cmd_project(cli: &Cli, weights: &[f64], eps: f64) -> Result<(), Failure> {
    reject_csv(cli, "project")?;
    let p = linf_project(weights, eps)?;
    let text = match cli.format {
        Some(_) => json_line(&p)?,
        None => p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",") + "\n",
    };
    emit(cli, &text)
}

/// Small checks that exercise each module; prints one PASS/FAIL line each.
fn cmd_selftest(cli: &Cli) -> Result<(), Failure> {
    let gauss = FamilySpec::gaussian(1.0, -1.0, 2.0)?;
    let bai = ProblemInstance::new(gauss, 2, ProblemKind::Bai)?;
    let model = tas_core::BanditModel::new(vec![1.0, 0.0])?;
    let mut checks: Vec<(&str, bool)> = Vec::new();

    let sol = oracle::solve(&bai, &model, &OracleConfig::default())?;
    let (_, w) = sol.representative();
    checks.push(("oracle closed form", (sol.t_star_inv - 0.125).abs() < 1e-9 && (w[0] - 0.5).abs() < 1e-6));

    let bern = FamilySpec::bernoulli(0.01, 0.99)?;
    let mut kl_ok = true;
    for (fam, pts) in [(gauss, [0.3, -0.7, 1.4]), (bern, [0.2, 0.7, 0.45])] {
        let [a, b, c] = pts;
        let lhs = fam.kl(a, b);
        let rhs = fam.kl(a, c) + fam.kl(c, b) + (fam.natural_param(b)? - fam.natural_param(c)?) * (c - a);
        kl_ok &= (lhs - rhs).abs() < 1e-10;
    }
    checks.push(("KL three-point identity", kl_ok));

    let p = linf_project(&[1.0, 0.0, 0.0], 0.1)?;
    checks.push(("projection", (p[0] - 0.8).abs() < 1e-12 && (p[1] - 0.1).abs() < 1e-12));

    let mut cfg = algorithms::AlgoConfig::new(Algorithm::Tas);
    cfg.diagnostics.trajectory_stride = Some(1);
    let easy = tas_core::BanditModel::new(vec![2.0, 0.0])?;
    let r1 = algorithms::run(&bai, &easy, &cfg, 0.5, 1)?;
    let r2 = algorithms::run(&bai, &easy, &cfg, 0.5, 1)?;
    checks.push(("run determinism", r1 == r2));
    checks.push(("easy run stops", r1.stopped() && r1.stopping_time <= 10_000));
    let forced = r1.trajectory.as_ref().is_some_and(|tr| {
        tr.iter().all(|pt| pt.counts.iter().all(|&n| n as f64 >= (pt.t as f64 + 4.0).sqrt() - 4.0))
    });
    checks.push(("forced exploration", forced));

    let mut text = String::new();
    for (name, ok) in &checks {
        text += &format!("{} {name}\n", if *ok { "PASS" } else { "FAIL" });
    }
    emit(cli, &text)?;
    if checks.iter().all(|c| c.1) {
        Ok(())
    } else {
        Err(Failure { code: 2, error: anyhow::anyhow!("self-test failed") })
    }
}
