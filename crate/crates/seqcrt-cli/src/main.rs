//! Command-line front end for the selection pipelines, FDR bounds,
//! adversarial constructions, conditional-level estimation, and the
//! simulation harness.
//!
//! Subcommands read JSON configuration files or flags, print JSON (or CSV
//! for tables) to stdout, and exit nonzero on failure. `SEQCRT_THREADS`
//! caps the parallel worker count; `RUST_LOG=warn` surfaces numeric
//! diagnostics from the fitting code.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use seqcrt::covariates::{CovariateModel, CovariateModelConfig};
use seqcrt::crt::{CrtConfig, CrtMode};
use seqcrt::harness::{
    configure_thread_pool, load_dataset_csv, run_experiment, select_on_data, timing_comparison,
    write_results_csv, ExperimentConfig, MethodKind, ModelSource, TimingConfig, DEFAULT_SHRINK,
};
use seqcrt::selection::{seqstep_select, Ordering};
use seqcrt::stats::{LassoParams, ScoreKind, StatisticKind};
use seqcrt::theory::{
    bound_almost_independent, bound_arbitrary, bound_exchangeable, epsilon_surface,
    ConditionalLevelConfig, ExchangeableSharp, GlobalNullSharp,
};
use seqcrt::{RngStream, Selection, SeqStepParams};

#[derive(Parser)]
#[command(
    name = "seqcrt",
    version,
    about = "Conditional randomization testing with FDR-controlled sequential selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replicated synthetic experiment from a JSON config.
    Simulate {
        /// Experiment configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Result CSV path; overrides the config's `output` field.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Closed-form worst-case FDR bounds for the selection filter.
    Bounds {
        #[command(subcommand)]
        which: BoundsCommand,
    },
    /// Adversarial p-value constructions that stress the FDR bounds.
    Adversarial {
        #[arg(long, value_enum)]
        kind: AdversarialKind,
        /// Number of p-values.
        #[arg(long)]
        p: usize,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        q: f64,
        /// Pairwise indicator correlation (exchangeable kind only).
        #[arg(long)]
        rho: Option<f64>,
        /// Monte Carlo replicates; omit to print the construction only.
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Estimate conditional below-threshold levels on simulated data.
    AjEstimate {
        /// JSON file with `model` (block-Gaussian) and `estimator` sections.
        #[arg(long)]
        config: PathBuf,
        /// FDR target used to report the implied bound.
        #[arg(long, default_value_t = 0.1)]
        q: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run one selection method on a CSV dataset (`y,x1,...,xp`).
    Select {
        #[arg(long)]
        data: PathBuf,
        /// Covariate model config (JSON); mutually exclusive with --fit-gaussian.
        #[arg(long, conflicts_with = "fit_gaussian")]
        model: Option<PathBuf>,
        /// Fit a Gaussian covariate model to the data (default when no model
        /// is given).
        #[arg(long)]
        fit_gaussian: bool,
        /// Diagonal shrinkage added to the fitted covariance.
        #[arg(long, default_value_t = DEFAULT_SHRINK)]
        shrink: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::SymmetricOneshot)]
        method: MethodArg,
        /// Resampled copies per variable.
        #[arg(long, default_value_t = 9)]
        b: usize,
        #[arg(long, value_enum, default_value_t = StatisticArg::Lasso)]
        statistic: StatisticArg,
        /// Working p-value threshold of the selection filter.
        #[arg(long, default_value_t = 0.1)]
        c: f64,
        /// Target FDR level.
        #[arg(long, default_value_t = 0.1)]
        q: f64,
        /// Row fraction given to the p-value fold (split method only).
        #[arg(long, default_value_t = 0.5)]
        split_frac: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare wall-clock cost of per-copy refits versus the joint fit.
    Timing {
        /// Timing configuration (JSON).
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum BoundsCommand {
    /// Bound under (delta, epsilon)-almost-independent null p-values.
    AlmostIndependent {
        #[arg(long)]
        c: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
    },
    /// Bound for exchangeable below-threshold indicators; with `--rho` the
    /// correlation-refined variant, without it the simple one.
    Exchangeable {
        #[arg(long)]
        c: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Bound under arbitrary dependence given the null positions (1-based)
    /// in the selection ordering.
    Arbitrary {
        #[arg(long)]
        c: f64,
        #[arg(long)]
        q: f64,
        /// Total number of ordered p-values.
        #[arg(long)]
        p: usize,
        #[arg(long, value_delimiter = ',')]
        null_positions: Vec<usize>,
    },
    /// Epsilon-inflation surface over a (q, rho) grid, as CSV.
    EpsilonSurface {
        #[arg(long)]
        c: f64,
        #[arg(long, value_delimiter = ',')]
        q_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        rho_grid: Vec<f64>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AdversarialKind {
    /// Every variable null; all-or-nothing rejections.
    GlobalNull,
    /// Exchangeably correlated below-threshold indicators.
    Exchangeable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Split,
    SymmetricOriginal,
    SymmetricOneshot,
}

impl From<MethodArg> for MethodKind {
    fn from(arg: MethodArg) -> Self {
        match arg {
            MethodArg::Split => MethodKind::Split,
            MethodArg::SymmetricOriginal => MethodKind::SymmetricOriginal,
            MethodArg::SymmetricOneshot => MethodKind::SymmetricOneshot,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StatisticArg {
    /// Absolute probe-response correlation.
    Correlation,
    /// Cross-validated penalized-regression coefficient.
    Lasso,
}

impl From<StatisticArg> for StatisticKind {
    fn from(arg: StatisticArg) -> Self {
        match arg {
            StatisticArg::Correlation => StatisticKind::AbsCorrelation,
            StatisticArg::Lasso => {
                StatisticKind::LassoCoefficient { params: LassoParams::default() }
            }
        }
    }
}

fn main() -> Result<()> {
    env_logger::init();
    configure_thread_pool();
    match Cli::parse().command {
        Command::Simulate { config, output } => simulate(&config, output.as_deref()),
        Command::Bounds { which } => bounds(which),
        Command::Adversarial { kind, p, c, q, rho, reps, seed } => {
            adversarial(kind, p, c, q, rho, reps, seed)
        }
        Command::AjEstimate { config, q, seed } => aj_estimate(&config, q, seed),
        Command::Select {
            data,
            model,
            fit_gaussian,
            shrink,
            method,
            b,
            statistic,
            c,
            q,
            split_frac,
            seed,
        } => select(
            &data,
            model.as_deref(),
            fit_gaussian,
            shrink,
            method,
            b,
            statistic,
            c,
            q,
            split_frac,
            seed,
        ),
        Command::Timing { config } => timing(&config),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {what} from {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {what} in {}", path.display()))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn simulate(config_path: &Path, output: Option<&Path>) -> Result<()> {
    let config: ExperimentConfig = read_json(config_path, "experiment config")?;
    let report = run_experiment(&config).context("running the experiment")?;

    let out_path = output
        .map(Path::to_path_buf)
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("results.csv"));
    write_results_csv(&report.rows, &out_path)
        .with_context(|| format!("writing {}", out_path.display()))?;

    println!(
        "{:>10}  {:<18} {:>5}  {:>8}  {:>10}  {:>13}",
        "amplitude", "method", "reps", "mean_fdp", "mean_power", "mean_selected"
    );
    for cell in report.summary() {
        println!(
            "{:>10}  {:<18} {:>5}  {:>8.4}  {:>10.4}  {:>13.2}",
            cell.amplitude,
            cell.method.label(),
            cell.n_reps,
            cell.mean_fdp,
            cell.mean_power,
            cell.mean_selected
        );
    }
    println!("wrote {} rows to {}", report.rows.len(), out_path.display());

    if !report.failures.is_empty() {
        eprintln!("{} replication(s) failed:", report.failures.len());
        for failure in &report.failures {
            eprintln!(
                "  amplitude {} method {} rep {}: {}",
                failure.amplitude, failure.method, failure.rep, failure.message
            );
        }
        std::process::exit(1);
    }
    Ok(())
}

fn bounds(which: BoundsCommand) -> Result<()> {
    match which {
        BoundsCommand::AlmostIndependent { c, q, delta, epsilon } => {
            print_json(&bound_almost_independent(c, q, delta, epsilon)?)
        }
        BoundsCommand::Exchangeable { c, q, rho } => print_json(&bound_exchangeable(c, q, rho)?),
        BoundsCommand::Arbitrary { c, q, p, null_positions } => {
            print_json(&bound_arbitrary(c, q, &null_positions, p)?)
        }
        BoundsCommand::EpsilonSurface { c, q_grid, rho_grid, output } => {
            let cells = epsilon_surface(c, &q_grid, &rho_grid)?;
            let mut csv = String::from("c,q,rho,epsilon\n");
            for cell in &cells {
                csv.push_str(&format!("{},{},{},{}\n", cell.c, cell.q, cell.rho, cell.epsilon));
            }
            match output {
                Some(path) => std::fs::write(&path, csv)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{csv}"),
            }
            Ok(())
        }
    }
}

/// Mean false discovery proportion of the filter over sampled p-value
/// vectors, with the nulls at `null_from..p`.
fn mc_fdr(
    sample: impl Fn(&RngStream) -> Vec<f64> + Sync,
    p: usize,
    null_from: usize,
    params: &SeqStepParams,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    let root = RngStream::root(seed);
    let ordering = Ordering::identity(p);
    let mut total = 0.0;
    for rep in 0..reps {
        let pvals = sample(&root.child(rep as u64));
        let selection: Selection = seqstep_select(&pvals, &ordering, params)?;
        let false_pos = selection.selected.iter().filter(|&&j| j >= null_from).count();
        total += false_pos as f64 / selection.selected.len().max(1) as f64;
    }
    Ok(total / reps as f64)
}

fn adversarial(
    kind: AdversarialKind,
    p: usize,
    c: f64,
    q: f64,
    rho: Option<f64>,
    reps: Option<usize>,
    seed: u64,
) -> Result<()> {
    let params = SeqStepParams::new(c, q)?;
    match kind {
        AdversarialKind::GlobalNull => {
            if rho.is_some() {
                bail!("--rho only applies to the exchangeable construction");
            }
            let construction = GlobalNullSharp::new(p, c, q)?;
            let mc = reps
                .map(|r| mc_fdr(|s| construction.sample(s), p, 0, &params, r, seed))
                .transpose()?;
            print_json(&json!({
                "kind": "global_null",
                "p": p,
                "c": c,
                "q": q,
                "low_count": construction.low_count(),
                "exact_fdr": construction.low_prob(),
                "mc_reps": reps,
                "mc_fdr": mc,
            }))
        }
        AdversarialKind::Exchangeable => {
            let rho = rho.context("the exchangeable construction needs --rho")?;
            let construction = ExchangeableSharp::new(p, c, q, rho)?;
            let nulls_from = construction.nonnull_count();
            let mc = reps
                .map(|r| mc_fdr(|s| construction.sample(s), p, nulls_from, &params, r, seed))
                .transpose()?;
            print_json(&json!({
                "kind": "exchangeable",
                "p": p,
                "c": c,
                "q": q,
                "rho": rho,
                "nonnull_count": construction.nonnull_count(),
                "low_atom": construction.low_atom(),
                "high_atom": construction.high_atom(),
                "low_weight": construction.low_weight(),
                "fdr_limit": construction.fdr_limit(),
                "mc_reps": reps,
                "mc_fdr": mc,
            }))
        }
    }
}

#[derive(serde::Deserialize)]
struct AjEstimateFile {
    /// Block-Gaussian covariate model the levels are estimated under.
    model: CovariateModelConfig,
    estimator: ConditionalLevelConfig,
}

fn aj_estimate(config_path: &Path, q: f64, seed: u64) -> Result<()> {
    let file: AjEstimateFile = read_json(config_path, "estimator config")?;
    let model = match file.model.build()? {
        CovariateModel::Gaussian(m) => m,
        CovariateModel::Hmm(_) => {
            bail!("conditional-level estimation needs a block-Gaussian covariate model")
        }
    };
    let report = seqcrt::theory::estimate_conditional_levels(
        &model,
        &file.estimator,
        &RngStream::root(seed),
    )?;
    let bound = bound_almost_independent(
        report.c,
        q,
        report.suggested_delta,
        report.suggested_epsilon,
    )?;
    print_json(&json!({
        "report": report,
        "q": q,
        "bound": bound,
    }))
}

#[allow(clippy::too_many_arguments)]
fn select(
    data: &Path,
    model: Option<&Path>,
    fit_gaussian: bool,
    shrink: f64,
    method: MethodArg,
    b: usize,
    statistic: StatisticArg,
    c: f64,
    q: f64,
    split_frac: f64,
    seed: u64,
) -> Result<()> {
    let dataset =
        load_dataset_csv(data).with_context(|| format!("loading {}", data.display()))?;
    let source = match (model, fit_gaussian) {
        (Some(path), false) => {
            ModelSource::Config { model: read_json(path, "covariate model config")? }
        }
        // Fitting is also the default when no explicit model is given.
        (None, _) => ModelSource::FitGaussian { shrink },
        (Some(_), true) => unreachable!("clap rejects --model with --fit-gaussian"),
    };
    let crt = CrtConfig {
        b,
        mode: CrtMode::OneShot,
        statistic: statistic.into(),
        score: ScoreKind::MaxStat,
    };
    let params = SeqStepParams::new(c, q)?;
    let selection = select_on_data(
        &dataset,
        &source,
        &crt,
        &params,
        method.into(),
        split_frac,
        &RngStream::root(seed),
    )?;
    let selected_1based: Vec<usize> = selection.selected.iter().map(|j| j + 1).collect();
    print_json(&json!({
        "n": dataset.n(),
        "p": dataset.p(),
        "k_hat": selection.k_hat,
        "n_selected": selected_1based.len(),
        "selected": selected_1based,
    }))
}

fn timing(config_path: &Path) -> Result<()> {
    let config: TimingConfig = read_json(config_path, "timing config")?;
    let report = timing_comparison(&config).context("running the timing comparison")?;
    print_json(&report)
}
