//! Command-line driver.
//!
//! Exit codes: 0 success, 2 invalid invocation or configuration, 1 failure
//! while working.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bankio::{read_bank, read_csv, synth_generate, write_bank, BankAccess, FeatureBank, SyntheticSpec};
use crate::classifier::{write_model, TrainConfig};
use crate::error::Error;
use crate::optimizer::OptimizerVariant;
use crate::protocol::{
    compare_strategies, plan_states, run_incremental_with_artifacts, run_upper_bound_with_artifacts, AvgMode,
    ClimbSettings, Method, RunConfig,
};
use crate::report::{comparison_csv, report_csv, to_canonical_json};
use crate::selection::{StrategyKind, StrategySpec};

/// Environment variable holding the default worker-thread cap.
pub const THREADS_ENV: &str = "FEATRANS_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "featrans",
    version,
    about = "Pseudo-feature translation for exemplar-free class-incremental learning"
)]
pub struct Cli {
    /// Worker threads (default: $FEATRANS_THREADS, else all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic feature bank from a JSON spec.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the incremental protocol with pseudo-features.
    Run(RunArgs),
    /// Run the protocol with real past-class features (upper bound).
    Upper(RunArgs),
    /// Compare several methods on the same bank, seed and class order.
    Compare(CompareArgs),
    /// Print a summary of a feature bank.
    Inspect {
        #[arg(long)]
        bank: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Feature bank (FEATBANK binary, or CSV when the name ends in .csv).
    #[arg(long)]
    pub bank: PathBuf,
    /// Classes in the initial state.
    #[arg(long)]
    pub initial: usize,
    /// Pseudo-features (and real features) per class.
    #[arg(long)]
    pub s: usize,
    /// Rank used by the kth strategy.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub replace_cnt: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = ["all", "incremental"], default_value = "all")]
    pub avg_mode: String,
    /// SVM regularization C.
    #[arg(long, default_value_t = 1.0)]
    pub reg: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_epochs: usize,
    /// Feed raw (not L2-normalized) features to the classifier.
    #[arg(long)]
    pub no_normalize: bool,
    /// Train on every real row of new classes instead of the first s.
    #[arg(long)]
    pub no_truncate: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Incremental states after the initial one.
    #[arg(long = "T")]
    pub states: usize,
    #[arg(long, value_parser = ["kth", "rand", "herd", "m2", "m3"])]
    pub strategy: String,
    #[arg(long, value_parser = ["single", "multi", "shift", "m2opt", "m3opt", "M2opt", "M3opt"])]
    pub variant: Option<String>,
    /// Report JSON path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write hill-climbing traces as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the final state's classifier.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// One or more incremental-state counts, comma separated.
    #[arg(long = "T", value_delimiter = ',', required = true)]
    pub states: Vec<usize>,
    /// Base strategy for the optimizer variants.
    #[arg(long, value_parser = ["kth", "rand", "herd", "m2", "m3"], default_value = "kth")]
    pub strategy: String,
    /// Methods: kth, kth<N>, rand, herd, m2, m3, single, multi, shift, m2opt, m3opt, M2opt, M3opt, upper.
    #[arg(long, value_delimiter = ',', required = true)]
    pub strategies: Vec<String>,
    #[arg(long)]
    pub baseline: String,
    /// Comparison CSV path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comparison JSON path, including every run report.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::Runtime(e)
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn load_bank(path: &Path) -> Result<FeatureBank, CliError> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let loaded = if is_csv { read_csv(path) } else { read_bank(path) };
    loaded.map_err(|e| match e {
        Error::Io(io) => CliError::Usage(format!("{}: {io}", path.display())),
        other => CliError::Runtime(other),
    })
}

fn base_config(common: &CommonArgs, states: usize, strategy: &str) -> Result<RunConfig, CliError> {
    let kind: StrategyKind = strategy.parse().map_err(usage)?;
    let mut cfg = RunConfig::new(
        states,
        common.initial,
        StrategySpec {
            kind,
            k: common.k,
            s: common.s,
        },
        common.seed,
    );
    cfg.hill_climb = ClimbSettings {
        max_iter: common.max_iter,
        patience: common.patience,
        replace_cnt: common.replace_cnt,
    };
    cfg.train = TrainConfig {
        regularization: common.reg,
        tolerance: common.tol,
        max_epochs: common.max_epochs,
        normalize: !common.no_normalize,
    };
    cfg.avg_mode = if common.avg_mode == "incremental" {
        AvgMode::Incremental
    } else {
        AvgMode::All
    };
    cfg.truncate_real = !common.no_truncate;
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn check_plan(bank: &FeatureBank, cfg: &RunConfig) -> Result<(), CliError> {
    plan_states(&bank.class_ids(), cfg.states, cfg.initial, 0).map_err(usage)?;
    Ok(())
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Runtime(e.into()))
}

fn cmd_run(args: &RunArgs, upper: bool) -> Result<(), CliError> {
    let mut cfg = base_config(&args.common, args.states, &args.strategy)?;
    cfg.variant = args
        .variant
        .as_deref()
        .map(str::parse::<OptimizerVariant>)
        .transpose()
        .map_err(usage)?;
    let bank = load_bank(&args.common.bank)?;
    check_plan(&bank, &cfg)?;

    let (report, artifacts) = if upper {
        run_upper_bound_with_artifacts(&bank, &cfg)?
    } else {
        run_incremental_with_artifacts(&bank, &cfg)?
    };
    write_file(&args.out, to_canonical_json(&report)?.as_bytes())?;
    if let Some(p) = &args.csv {
        write_file(p, report_csv(&report).as_bytes())?;
    }
    if let Some(p) = &args.trace {
        let mut lines = String::new();
        for (state, trace) in &artifacts.traces {
            let v = serde_json::json!({ "state": state, "trace": trace });
            lines.push_str(&serde_json::to_string(&v).map_err(Error::from)?);
            lines.push('\n');
        }
        write_file(p, lines.as_bytes())?;
    }
    if let (Some(p), Some(model)) = (&args.model_out, &artifacts.final_model) {
        write_model(model, p)?;
    }
    println!(
        "{}: avg top-1 {:.2}, avg top-5 {:.2} over {} states",
        report.method,
        100.0 * report.averages.avg_top1,
        100.0 * report.averages.avg_top5,
        report.per_state.len()
    );
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<(), CliError> {
    let base = base_config(&args.common, args.states[0], &args.strategy)?;
    let methods = args
        .strategies
        .iter()
        .map(|s| Ok((s.clone(), s.parse::<Method>().map_err(usage)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    if !args.strategies.contains(&args.baseline) {
        return Err(usage(format!("baseline {:?} is not in --strategies", args.baseline)));
    }
    let bank = load_bank(&args.common.bank)?;
    for &t in &args.states {
        check_plan(
            &bank,
            &RunConfig {
                states: t,
                ..base.clone()
            },
        )?;
    }
    let cmp = compare_strategies(&bank, &base, &methods, &args.baseline, &args.states)?;
    let csv = comparison_csv(&cmp);
    match &args.out {
        Some(p) => write_file(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    if let Some(p) = &args.json {
        write_file(p, to_canonical_json(&cmp)?.as_bytes())?;
    }
    Ok(())
}

fn cmd_inspect(path: &Path) -> Result<(), CliError> {
    let bank = load_bank(path)?;
    let mut out = std::io::stdout().lock();
    let (mut train, mut test) = (0, 0);
    for (_, s) in bank.classes() {
        train += s.train.rows();
        test += s.test.rows();
    }
    let _ = writeln!(out, "dim: {}", bank.dim());
    let _ = writeln!(out, "classes: {}", bank.num_classes());
    let _ = writeln!(out, "train rows: {train}");
    let _ = writeln!(out, "test rows: {test}");
    for m in &bank.source_meta {
        let _ = writeln!(out, "meta: {m}");
    }
    for (c, s) in bank.classes() {
        let _ = writeln!(out, "class {c}: train {}, test {}", s.train.rows(), s.test.rows());
    }
    Ok(())
}

fn cmd_synth(spec: &Path, out: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(spec).map_err(|e| usage(format!("{}: {e}", spec.display())))?;
    let spec: SyntheticSpec = serde_json::from_str(&text).map_err(usage)?;
    spec.validate().map_err(usage)?;
    let bank = synth_generate(&spec)?;
    write_bank(&bank, out)?;
    println!(
        "wrote {} classes of dim {} to {}",
        bank.num_classes(),
        bank.dim(),
        out.display()
    );
    Ok(())
}

fn thread_cap(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("{THREADS_ENV}={v:?} is not a thread count"))),
        _ => Ok(None),
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let threads = thread_cap(cli.threads)?;
    if threads == Some(0) {
        return Err(usage("--threads must be at least 1"));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| usage(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Synth { spec, out } => cmd_synth(spec, out),
        Command::Run(args) => cmd_run(args, false),
        Command::Upper(args) => cmd_run(args, true),
        Command::Compare(args) => cmd_compare(args),
        Command::Inspect { bank } => cmd_inspect(bank),
    })
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}
