//! Replicated synthetic experiments over an amplitude grid.
//!
//! [`run_experiment`] draws datasets from a configured covariate model and
//! response setting, runs each requested selection method on every
//! replicate, and scores false discovery proportion and power against the
//! generating support. Randomness is arranged so that every result row is a
//! pure function of `(seed, rep, method, amplitude)`: covariates, support,
//! and response noise are shared across the amplitude grid (common random
//! numbers), and per-method streams are keyed by the method itself, not its
//! position in the configuration.

use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariates::{CovariateModel, CovariateModelConfig, StructureConfig};
use crate::crt::{crt_all_variables, CrtConfig, CrtMode};
use crate::data::{Dataset, Selection, SeqStepParams};
use crate::error::{Error, Result};
use crate::response::{generate_response, GroundTruth, ResponseKind, ResponseSpec};
use crate::rng::RngStream;
use crate::selection::{pipeline_split, pipeline_symmetric};
use crate::stats::StatisticKind;

/// Child labels under a replicate's stream. Methods get fixed offsets from
/// [`MethodKind::stream_key`] so that adding or reordering methods in a
/// configuration never changes any other method's draws.
const CHILD_SUPPORT: u64 = 0;
const CHILD_COVARIATES: u64 = 1;
const CHILD_NOISE: u64 = 2;
const CHILD_METHOD_BASE: u64 = 8;

/// Which selection pipeline a replication runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    /// Row-splitting pipeline: ordering scores from a held-out fold.
    Split,
    /// Symmetric-score pipeline with one refit per resampled copy.
    SymmetricOriginal,
    /// Symmetric-score pipeline with a single joint fit over all copies.
    SymmetricOneshot,
}

impl MethodKind {
    /// Stable name used in CSV output and config files.
    pub fn label(&self) -> &'static str {
        match self {
            MethodKind::Split => "split",
            MethodKind::SymmetricOriginal => "symmetric_original",
            MethodKind::SymmetricOneshot => "symmetric_oneshot",
        }
    }

    /// Fixed per-method stream offset; independent of configuration order.
    fn stream_key(&self) -> u64 {
        match self {
            MethodKind::Split => 0,
            MethodKind::SymmetricOriginal => 1,
            MethodKind::SymmetricOneshot => 2,
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Default three-point amplitude grid for a response setting, spanning the
/// low- and high-signal operating points used by the synthetic studies.
pub fn default_amplitudes(kind: ResponseKind) -> Vec<f64> {
    match kind {
        ResponseKind::Linear => vec![2.0, 3.5, 5.0],
        ResponseKind::Logistic => vec![6.0, 12.0, 30.0],
        ResponseKind::NonlinearPairs => vec![8.0, 15.0, 22.0],
        ResponseKind::NonlinearBinary => vec![10.0, 20.0, 30.0],
    }
}

/// Full description of a replicated experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Covariate model; its dimension must match `p`.
    pub model: CovariateModelConfig,
    pub response: ResponseKind,
    /// Observations per replicate.
    pub n: usize,
    /// Variables per replicate.
    pub p: usize,
    /// Nonnull support size (even for the pair-interaction setting).
    pub k: usize,
    /// Signal amplitudes; empty means the default grid for the setting.
    #[serde(default)]
    pub amplitudes: Vec<f64>,
    /// Selection methods to run on every replicate.
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodKind>,
    #[serde(default)]
    pub crt: CrtConfig,
    /// Working p-value threshold of the selection filter.
    pub c: f64,
    /// Target FDR level of the selection filter.
    pub q: f64,
    /// Fraction of rows given to the p-value fold of the split method.
    #[serde(default = "default_split_frac")]
    pub split_frac: f64,
    pub n_reps: usize,
    pub seed: u64,
    /// Measure wall-clock time per replication. Off by default so that runs
    /// with the same seed produce byte-identical CSV output (`runtime_ms`
    /// is written as 0 when disabled).
    #[serde(default)]
    pub record_runtime: bool,
    /// Where the CLI writes the result table; ignored by [`run_experiment`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_methods() -> Vec<MethodKind> {
    vec![MethodKind::SymmetricOneshot]
}

fn default_split_frac() -> f64 {
    0.5
}

impl ExperimentConfig {
    /// A configuration with default grid, methods, test settings, and
    /// selection levels `c = q = 0.1`; callers adjust fields as needed.
    pub fn new(model: CovariateModelConfig, response: ResponseKind, n: usize, p: usize, k: usize) -> Self {
        Self {
            model,
            response,
            n,
            p,
            k,
            amplitudes: Vec::new(),
            methods: default_methods(),
            crt: CrtConfig::default(),
            c: 0.1,
            q: 0.1,
            split_frac: default_split_frac(),
            n_reps: 100,
            seed: 0,
            record_runtime: false,
            output: None,
        }
    }

    /// The amplitude grid actually run: the configured one, or the default
    /// grid for the response setting when none was given.
    pub fn amplitude_grid(&self) -> Vec<f64> {
        if self.amplitudes.is_empty() {
            default_amplitudes(self.response)
        } else {
            self.amplitudes.clone()
        }
    }

    /// Selection-filter parameters built from `c` and `q`.
    pub fn seqstep_params(&self) -> Result<SeqStepParams> {
        SeqStepParams::new(self.c, self.q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::InvalidParameter(format!(
                "need at least 4 observations per replicate, got n = {}",
                self.n
            )));
        }
        if self.k > self.p {
            return Err(Error::InvalidParameter(format!(
                "support size k = {} exceeds p = {}",
                self.k, self.p
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("no selection methods requested".into()));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::InvalidParameter(format!(
                    "method {m} listed more than once"
                )));
            }
        }
        if self.amplitude_grid().iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidParameter(
                "amplitudes must be finite and nonnegative".into(),
            ));
        }
        if self.n_reps == 0 {
            return Err(Error::InvalidParameter("n_reps must be at least 1".into()));
        }
        self.seqstep_params()?;
        self.crt.validate()?;
        if self.methods.contains(&MethodKind::Split) && !(self.split_frac > 0.0 && self.split_frac < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "split fraction must lie in (0, 1), got {}",
                self.split_frac
            )));
        }
        self.model.build()?.with_row_length(self.p)?;
        Ok(())
    }

    /// Response-setting label written to the `setting` CSV column.
    pub fn setting_label(&self) -> &'static str {
        match self.response {
            ResponseKind::Linear => "linear",
            ResponseKind::Logistic => "logistic",
            ResponseKind::NonlinearPairs => "nonlinear_pairs",
            ResponseKind::NonlinearBinary => "nonlinear_binary",
        }
    }

    /// Covariate-family label written to the `family` CSV column.
    pub fn family_label(&self) -> &'static str {
        match &self.model {
            CovariateModelConfig::Gaussian { structure: Some(StructureConfig::Ar1 { .. }), .. } => {
                "gaussian_ar1"
            }
            CovariateModelConfig::Gaussian {
                structure: Some(StructureConfig::Block { .. }), ..
            } => "gaussian_block",
            CovariateModelConfig::Gaussian { .. } => "gaussian_explicit",
            CovariateModelConfig::Hmm { .. } => "hmm",
        }
    }
}

/// One scored replication; also one row of the result CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub setting: String,
    pub family: String,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub amplitude: f64,
    pub method: MethodKind,
    /// Replicate number, 1-based.
    pub rep: usize,
    /// False discoveries over selections (0 when nothing is selected).
    pub fdp: f64,
    /// True discoveries over true nonnulls (0 under the global null).
    pub power: f64,
    pub n_selected: usize,
    /// Wall-clock milliseconds; 0 unless `record_runtime` was set.
    pub runtime_ms: u64,
    /// Stream id of the replicate-and-method stream that drove the run.
    pub seed: u64,
}

/// A replication that returned an error instead of a selection.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub amplitude: f64,
    pub method: MethodKind,
    /// Replicate number, 1-based.
    pub rep: usize,
    pub message: String,
}

/// Everything a finished experiment produced.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReplicationResult>,
    /// Failed replications; the run continues past them, so `rows` holds
    /// every cell of the grid except these.
    pub failures: Vec<ReplicationFailure>,
}

/// Mean outcomes of one `(amplitude, method)` cell of the grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub amplitude: f64,
    pub method: MethodKind,
    /// Successful replications behind the means.
    pub n_reps: usize,
    pub mean_fdp: f64,
    pub mean_power: f64,
    pub mean_selected: f64,
}

impl ExperimentReport {
    /// Per-cell means in row order (amplitude outermost, then method).
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut out: Vec<SummaryRow> = Vec::new();
        for row in &self.rows {
            match out
                .iter_mut()
                .find(|s| s.amplitude == row.amplitude && s.method == row.method)
            {
                Some(cell) => {
                    cell.n_reps += 1;
                    cell.mean_fdp += row.fdp;
                    cell.mean_power += row.power;
                    cell.mean_selected += row.n_selected as f64;
                }
                None => out.push(SummaryRow {
                    amplitude: row.amplitude,
                    method: row.method,
                    n_reps: 1,
                    mean_fdp: row.fdp,
                    mean_power: row.power,
                    mean_selected: row.n_selected as f64,
                }),
            }
        }
        for cell in &mut out {
            let denom = cell.n_reps as f64;
            cell.mean_fdp /= denom;
            cell.mean_power /= denom;
            cell.mean_selected /= denom;
        }
        out
    }

    /// Mean FDP of one grid cell, if any replication of it succeeded.
    pub fn mean_fdp(&self, amplitude: f64, method: MethodKind) -> Option<f64> {
        self.summary()
            .into_iter()
            .find(|s| s.amplitude == amplitude && s.method == method)
            .map(|s| s.mean_fdp)
    }

    /// Mean power of one grid cell, if any replication of it succeeded.
    pub fn mean_power(&self, amplitude: f64, method: MethodKind) -> Option<f64> {
        self.summary()
            .into_iter()
            .find(|s| s.amplitude == amplitude && s.method == method)
            .map(|s| s.mean_power)
    }
}

/// Run one method on one dataset; used by both the experiment driver and
/// data-file selection. The symmetric variants override the configured
/// evaluation mode; the split method uses it as given.
pub fn run_method(
    dataset: &Dataset,
    model: &CovariateModel,
    crt: &CrtConfig,
    params: &SeqStepParams,
    split_frac: f64,
    method: MethodKind,
    stream: &RngStream,
) -> Result<Selection> {
    match method {
        MethodKind::Split => pipeline_split(dataset, model, crt, params, split_frac, stream),
        MethodKind::SymmetricOriginal => {
            let cfg = CrtConfig { mode: CrtMode::Original, ..crt.clone() };
            pipeline_symmetric(dataset, model, &cfg, params, stream)
        }
        MethodKind::SymmetricOneshot => {
            let cfg = CrtConfig { mode: CrtMode::OneShot, ..crt.clone() };
            pipeline_symmetric(dataset, model, &cfg, params, stream)
        }
    }
}

/// Score a selection against the generating support.
///
/// At amplitude zero every coefficient vanishes, so the nominal support
/// carries no signal: all variables are treated as null and any selection
/// counts entirely as false discoveries.
fn score_selection(selected: &[usize], truth: &GroundTruth, amplitude: f64) -> (f64, f64) {
    let nonnull: &[usize] = if amplitude == 0.0 { &[] } else { truth.nonnull_set() };
    let true_pos = selected.iter().filter(|j| nonnull.binary_search(j).is_ok()).count();
    let fdp = (selected.len() - true_pos) as f64 / selected.len().max(1) as f64;
    let power = true_pos as f64 / nonnull.len().max(1) as f64;
    (fdp, power)
}

/// Run the full grid: every amplitude × replicate × method.
///
/// Replicates run in parallel; rows are returned sorted by amplitude (grid
/// order), then replicate, then method (configuration order). Failed
/// replications are recorded in the report and do not abort the run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let model = cfg.model.build()?.with_row_length(cfg.p)?;
    let amplitudes = cfg.amplitude_grid();
    let params = cfg.seqstep_params()?;
    let root = RngStream::root(cfg.seed);

    let per_rep: Vec<(Vec<(usize, usize, usize, ReplicationResult)>, Vec<ReplicationFailure>)> =
        (0..cfg.n_reps)
            .into_par_iter()
            .map(|rep| run_replicate(cfg, &model, &amplitudes, &params, &root, rep))
            .collect();

    let mut keyed: Vec<(usize, usize, usize, ReplicationResult)> = Vec::new();
    let mut failures: Vec<ReplicationFailure> = Vec::new();
    for (rows, fails) in per_rep {
        keyed.extend(rows);
        failures.extend(fails);
    }
    keyed.sort_by_key(|(ai, rep, mi, _)| (*ai, *rep, *mi));
    failures.sort_by(|a, b| {
        (a.rep, a.method.stream_key(), a.amplitude)
            .partial_cmp(&(b.rep, b.method.stream_key(), b.amplitude))
            .expect("finite keys")
    });
    Ok(ExperimentReport { rows: keyed.into_iter().map(|(_, _, _, row)| row).collect(), failures })
}

/// All grid cells of one replicate, keyed for the final deterministic sort.
fn run_replicate(
    cfg: &ExperimentConfig,
    model: &CovariateModel,
    amplitudes: &[f64],
    params: &SeqStepParams,
    root: &RngStream,
    rep: usize,
) -> (Vec<(usize, usize, usize, ReplicationResult)>, Vec<ReplicationFailure>) {
    let rep_stream = root.child(rep as u64);
    let rep_1based = rep + 1;
    let mut rows = Vec::new();
    let mut failures = Vec::new();

    let everything_failed = |message: &str| -> Vec<ReplicationFailure> {
        amplitudes
            .iter()
            .flat_map(|&a| {
                cfg.methods.iter().map(move |&m| ReplicationFailure {
                    amplitude: a,
                    method: m,
                    rep: rep_1based,
                    message: message.to_string(),
                })
            })
            .collect()
    };

    let support = match ResponseSpec::draw_support(
        cfg.response,
        cfg.p,
        cfg.k,
        &rep_stream.child(CHILD_SUPPORT),
    ) {
        Ok(s) => s,
        Err(e) => return (rows, everything_failed(&e.to_string())),
    };
    let x = model.sample_rows(cfg.n, &rep_stream.child(CHILD_COVARIATES));
    let discrete = matches!(model, CovariateModel::Hmm(_));

    for (ai, &amplitude) in amplitudes.iter().enumerate() {
        let spec = if discrete {
            ResponseSpec::discrete_family(cfg.response, amplitude, support.clone())
        } else {
            ResponseSpec::gaussian_family(cfg.response, amplitude, support.clone())
        };
        // The noise stream is reused across amplitudes on purpose: the
        // generator consumes exactly n draws, so the grid shares its noise.
        let generated = generate_response(&x, &spec, &rep_stream.child(CHILD_NOISE))
            .and_then(|(y, truth)| {
                Dataset::new(x.clone(), y, cfg.response.response_class())
                    .map(|dataset| (dataset, truth))
            });
        let (dataset, truth) = match generated {
            Ok(pair) => pair,
            Err(e) => {
                for &m in &cfg.methods {
                    failures.push(ReplicationFailure {
                        amplitude,
                        method: m,
                        rep: rep_1based,
                        message: e.to_string(),
                    });
                }
                continue;
            }
        };

        for (mi, &method) in cfg.methods.iter().enumerate() {
            let method_stream = rep_stream.child(CHILD_METHOD_BASE + method.stream_key());
            let started = Instant::now();
            let outcome = run_method(
                &dataset,
                model,
                &cfg.crt,
                params,
                cfg.split_frac,
                method,
                &method_stream,
            );
            let runtime_ms = if cfg.record_runtime {
                started.elapsed().as_millis().min(u128::from(u64::MAX)) as u64
            } else {
                0
            };
            match outcome {
                Ok(selection) => {
                    let (fdp, power) = score_selection(&selection.selected, &truth, amplitude);
                    rows.push((
                        ai,
                        rep,
                        mi,
                        ReplicationResult {
                            setting: cfg.setting_label().to_string(),
                            family: cfg.family_label().to_string(),
                            n: cfg.n,
                            p: cfg.p,
                            k: cfg.k,
                            amplitude,
                            method,
                            rep: rep_1based,
                            fdp,
                            power,
                            n_selected: selection.selected.len(),
                            runtime_ms,
                            seed: method_stream.stream_id(),
                        },
                    ));
                }
                Err(e) => failures.push(ReplicationFailure {
                    amplitude,
                    method,
                    rep: rep_1based,
                    message: e.to_string(),
                }),
            }
        }
    }
    (rows, failures)
}

/// Configuration of the per-copy-refit versus joint-fit timing comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimingConfig {
    pub n: usize,
    pub p: usize,
    /// Nonnull support size of the linear response used for timing.
    pub k: usize,
    /// Resampled copies per variable.
    pub b: usize,
    #[serde(default = "default_timing_amplitude")]
    pub amplitude: f64,
    pub statistic: StatisticKind,
    /// AR(1) correlation of the covariate rows.
    #[serde(default = "default_timing_rho")]
    pub rho: f64,
    pub n_reps: usize,
    pub seed: u64,
}

fn default_timing_amplitude() -> f64 {
    3.5
}

fn default_timing_rho() -> f64 {
    0.5
}

/// Wall-clock comparison of the two evaluation modes on identical datasets.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimingReport {
    pub n: usize,
    pub p: usize,
    pub b: usize,
    pub n_reps: usize,
    /// Seconds per replicate, per-copy-refit mode.
    pub original_secs: Vec<f64>,
    /// Seconds per replicate, joint-fit mode.
    pub oneshot_secs: Vec<f64>,
    pub mean_original_secs: f64,
    pub mean_oneshot_secs: f64,
    /// `mean_oneshot_secs / mean_original_secs`.
    pub ratio: f64,
}

/// Time full p-value computation in both evaluation modes.
///
/// Each replicate draws one AR(1) dataset with a linear response, then runs
/// the randomization test over all variables twice: once refitting per copy,
/// once with the joint fit. Both runs see the same data.
pub fn timing_comparison(cfg: &TimingConfig) -> Result<TimingReport> {
    if cfg.n_reps == 0 {
        return Err(Error::InvalidParameter("n_reps must be at least 1".into()));
    }
    let model_cfg = CovariateModelConfig::Gaussian {
        p: Some(cfg.p),
        mean: None,
        covariance: None,
        structure: Some(StructureConfig::Ar1 { rho: cfg.rho }),
    };
    let model = model_cfg.build()?;
    let root = RngStream::root(cfg.seed);
    let base = CrtConfig { b: cfg.b, statistic: cfg.statistic.clone(), ..CrtConfig::default() };

    let mut original_secs = Vec::with_capacity(cfg.n_reps);
    let mut oneshot_secs = Vec::with_capacity(cfg.n_reps);
    for rep in 0..cfg.n_reps {
        let rep_stream = root.child(rep as u64);
        let support = ResponseSpec::draw_support(
            ResponseKind::Linear,
            cfg.p,
            cfg.k,
            &rep_stream.child(CHILD_SUPPORT),
        )?;
        let x = model.sample_rows(cfg.n, &rep_stream.child(CHILD_COVARIATES));
        let spec = ResponseSpec::gaussian_family(ResponseKind::Linear, cfg.amplitude, support);
        let (y, _) = generate_response(&x, &spec, &rep_stream.child(CHILD_NOISE))?;
        let dataset = Dataset::new(x, y, crate::data::ResponseClass::Continuous)?;

        let original_cfg = CrtConfig { mode: CrtMode::Original, ..base.clone() };
        let started = Instant::now();
        crt_all_variables(&dataset, &model, &original_cfg, &rep_stream.child(CHILD_METHOD_BASE))?;
        original_secs.push(started.elapsed().as_secs_f64());

        let oneshot_cfg = CrtConfig { mode: CrtMode::OneShot, ..base.clone() };
        let started = Instant::now();
        crt_all_variables(
            &dataset,
            &model,
            &oneshot_cfg,
            &rep_stream.child(CHILD_METHOD_BASE + 1),
        )?;
        oneshot_secs.push(started.elapsed().as_secs_f64());
    }
    let mean_original_secs = original_secs.iter().sum::<f64>() / cfg.n_reps as f64;
    let mean_oneshot_secs = oneshot_secs.iter().sum::<f64>() / cfg.n_reps as f64;
    Ok(TimingReport {
        n: cfg.n,
        p: cfg.p,
        b: cfg.b,
        n_reps: cfg.n_reps,
        original_secs,
        oneshot_secs,
        mean_original_secs,
        mean_oneshot_secs,
        ratio: mean_oneshot_secs / mean_original_secs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::io::results_csv;
    use crate::stats::{LassoParams, ScoreKind};

    fn ar1_config(n: usize, p: usize, k: usize) -> ExperimentConfig {
        let model = CovariateModelConfig::Gaussian {
            p: Some(p),
            mean: None,
            covariance: None,
            structure: Some(StructureConfig::Ar1 { rho: 0.5 }),
        };
        let mut cfg = ExperimentConfig::new(model, ResponseKind::Linear, n, p, k);
        cfg.crt = CrtConfig {
            b: 9,
            mode: CrtMode::OneShot,
            statistic: StatisticKind::AbsCorrelation,
            score: ScoreKind::MaxStat,
        };
        cfg
    }

    #[test]
    fn grid_is_fully_enumerated_in_order() {
        let mut cfg = ar1_config(40, 12, 3);
        cfg.amplitudes = vec![0.0, 6.0];
        cfg.methods = vec![MethodKind::Split, MethodKind::SymmetricOneshot];
        cfg.c = 0.2;
        cfg.q = 0.3;
        cfg.n_reps = 3;
        cfg.seed = 11;
        let report = run_experiment(&cfg).unwrap();
        assert!(report.failures.is_empty(), "failures: {:?}", report.failures);
        assert_eq!(report.rows.len(), 2 * 3 * 2);
        let mut expect = Vec::new();
        for &a in &[0.0, 6.0] {
            for rep in 1..=3 {
                for &m in &[MethodKind::Split, MethodKind::SymmetricOneshot] {
                    expect.push((a, rep, m));
                }
            }
        }
        let got: Vec<(f64, usize, MethodKind)> =
            report.rows.iter().map(|r| (r.amplitude, r.rep, r.method)).collect();
        assert_eq!(got, expect);
        for row in &report.rows {
            assert_eq!(row.setting, "linear");
            assert_eq!(row.family, "gaussian_ar1");
            assert_eq!((row.n, row.p, row.k), (40, 12, 3));
            assert_eq!(row.runtime_ms, 0, "runtime recording is off by default");
        }
    }

    #[test]
    fn reordering_methods_changes_no_row_values() {
        let mut forward = ar1_config(36, 10, 2);
        forward.amplitudes = vec![0.0, 5.0];
        forward.methods = vec![MethodKind::Split, MethodKind::SymmetricOneshot];
        forward.c = 0.2;
        forward.q = 0.3;
        forward.n_reps = 3;
        forward.seed = 21;
        let mut reversed = forward.clone();
        reversed.methods = vec![MethodKind::SymmetricOneshot, MethodKind::Split];

        let a = run_experiment(&forward).unwrap();
        let b = run_experiment(&reversed).unwrap();
        assert_eq!(a.rows.len(), b.rows.len());
        for row in &a.rows {
            let twin = b
                .rows
                .iter()
                .find(|r| {
                    r.method == row.method && r.rep == row.rep && r.amplitude == row.amplitude
                })
                .expect("every cell present under both orders");
            assert_eq!(twin, row);
        }
    }

    #[test]
    fn same_seed_means_identical_output_bytes() {
        let mut cfg = ar1_config(30, 8, 2);
        cfg.amplitudes = vec![0.0, 4.0];
        cfg.methods = vec![MethodKind::SymmetricOneshot];
        cfg.c = 0.2;
        cfg.q = 0.3;
        cfg.n_reps = 3;
        cfg.seed = 33;
        let first = results_csv(&run_experiment(&cfg).unwrap().rows);
        let second = results_csv(&run_experiment(&cfg).unwrap().rows);
        assert_eq!(first, second);

        cfg.seed = 34;
        let shifted = results_csv(&run_experiment(&cfg).unwrap().rows);
        assert_ne!(first, shifted, "a different master seed must change the draws");
    }

    #[test]
    fn replicate_and_method_streams_ignore_the_amplitude() {
        let mut cfg = ar1_config(30, 8, 2);
        cfg.amplitudes = vec![0.0, 4.0];
        cfg.methods = vec![MethodKind::Split, MethodKind::SymmetricOneshot];
        cfg.c = 0.2;
        cfg.q = 0.3;
        cfg.n_reps = 2;
        cfg.seed = 44;
        let report = run_experiment(&cfg).unwrap();
        for row in &report.rows {
            let other = report
                .rows
                .iter()
                .find(|r| r.rep == row.rep && r.method == row.method && r.amplitude != row.amplitude)
                .unwrap();
            assert_eq!(other.seed, row.seed, "seed column must not depend on amplitude");
        }
        let mut per_pair: Vec<u64> = report
            .rows
            .iter()
            .filter(|r| r.amplitude == 0.0)
            .map(|r| r.seed)
            .collect();
        per_pair.sort_unstable();
        per_pair.dedup();
        assert_eq!(per_pair.len(), 4, "each (rep, method) pair gets its own stream");
    }

    #[test]
    fn zero_amplitude_grid_point_controls_false_discoveries() {
        let mut cfg = ar1_config(80, 25, 5);
        cfg.amplitudes = vec![0.0];
        cfg.n_reps = 60;
        cfg.seed = 55;
        let report = run_experiment(&cfg).unwrap();
        assert!(report.failures.is_empty());
        let mean_fdp = report.mean_fdp(0.0, MethodKind::SymmetricOneshot).unwrap();
        let budget = 0.1 + 2.0 / (60.0_f64).sqrt();
        assert!(mean_fdp <= budget, "mean FDP {mean_fdp} above {budget}");
        assert!(report.rows.iter().all(|r| r.power == 0.0), "no power without signal");
    }

    #[test]
    fn power_rises_along_the_amplitude_grid() {
        let mut cfg = ar1_config(120, 30, 6);
        cfg.amplitudes = vec![1.0, 4.0, 8.0];
        cfg.q = 0.2;
        cfg.n_reps = 40;
        cfg.seed = 66;
        let report = run_experiment(&cfg).unwrap();
        assert!(report.failures.is_empty());
        let power: Vec<f64> = cfg
            .amplitudes
            .iter()
            .map(|&a| report.mean_power(a, MethodKind::SymmetricOneshot).unwrap())
            .collect();
        assert!(power[1] > power[0] - 0.05, "power dipped: {power:?}");
        assert!(power[2] > power[1] - 0.05, "power dipped: {power:?}");
        assert!(power[2] > power[0] + 0.1, "no overall rise: {power:?}");
    }

    #[test]
    fn failing_method_is_recorded_while_the_rest_continue() {
        // A 0.9 split of four rows leaves the ordering fold empty: the split
        // method fails on every replicate while the symmetric method runs.
        let mut cfg = ar1_config(4, 5, 1);
        cfg.amplitudes = vec![0.0];
        cfg.methods = vec![MethodKind::Split, MethodKind::SymmetricOneshot];
        cfg.split_frac = 0.9;
        cfg.crt.b = 2;
        cfg.c = 1.0 / 3.0;
        cfg.q = 0.3;
        cfg.n_reps = 2;
        cfg.seed = 77;
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2, "symmetric cells still produce rows");
        assert!(report.rows.iter().all(|r| r.method == MethodKind::SymmetricOneshot));
        assert_eq!(report.failures.len(), 2);
        for failure in &report.failures {
            assert_eq!(failure.method, MethodKind::Split);
            assert!(failure.message.contains("fewer than 2"), "message: {}", failure.message);
        }
    }

    #[test]
    fn config_validation_rejects_bad_grids() {
        let mut cfg = ar1_config(40, 10, 3);
        cfg.methods = vec![MethodKind::SymmetricOneshot, MethodKind::SymmetricOneshot];
        assert!(run_experiment(&cfg).is_err(), "duplicate methods");
        let mut cfg = ar1_config(40, 10, 11);
        cfg.amplitudes = vec![1.0];
        assert!(run_experiment(&cfg).is_err(), "support larger than p");
        let mut cfg = ar1_config(40, 10, 3);
        cfg.amplitudes = vec![-1.0];
        assert!(run_experiment(&cfg).is_err(), "negative amplitude");
        let mut cfg = ar1_config(40, 10, 3);
        cfg.q = 0.0;
        assert!(run_experiment(&cfg).is_err(), "q outside (0,1)");
    }

    #[test]
    fn default_grids_cover_every_setting() {
        for kind in [
            ResponseKind::Linear,
            ResponseKind::Logistic,
            ResponseKind::NonlinearPairs,
            ResponseKind::NonlinearBinary,
        ] {
            let grid = default_amplitudes(kind);
            assert_eq!(grid.len(), 3);
            assert!(grid.windows(2).all(|w| w[0] < w[1]), "{kind:?}: {grid:?}");
        }
        let cfg = ar1_config(40, 10, 3);
        assert_eq!(cfg.amplitude_grid(), vec![2.0, 3.5, 5.0]);
    }

    #[test]
    fn joint_fit_beats_per_copy_refits_even_with_two_copies() {
        let cfg = TimingConfig {
            n: 100,
            p: 50,
            k: 5,
            b: 1,
            amplitude: 3.5,
            statistic: StatisticKind::LassoCoefficient {
                params: LassoParams {
                    cv_folds: 3,
                    n_lambda: 8,
                    lambda_min_ratio: 0.1,
                    ..LassoParams::default()
                },
            },
            rho: 0.5,
            n_reps: 3,
            seed: 88,
        };
        let report = timing_comparison(&cfg).unwrap();
        assert_eq!(report.original_secs.len(), 3);
        assert_eq!(report.oneshot_secs.len(), 3);
        assert!(
            report.ratio < 0.9,
            "joint fit should cost well under two per-copy refits, ratio = {}",
            report.ratio
        );
    }
}
