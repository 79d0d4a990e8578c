//! Replicated synthetic experiments, result-table I/O, and timing runs.
//!
//! The harness turns a JSON-serializable [`ExperimentConfig`] into a scored
//! result table ([`run_experiment`]), compares the wall-clock cost of the
//! two p-value evaluation modes ([`timing_comparison`]), and applies the
//! selection pipelines to datasets loaded from CSV files
//! ([`load_dataset_csv`], [`select_on_data`]).
//!
//! Reproducibility contract: with runtime recording off, the rendered
//! result CSV is a pure function of the configuration — replicate streams
//! are keyed by replicate index, method streams by method identity, and the
//! amplitude grid shares covariates, support, and response noise.

mod experiment;
mod io;

pub use experiment::{
    default_amplitudes, run_experiment, run_method, timing_comparison, ExperimentConfig,
    ExperimentReport, MethodKind, ReplicationFailure, ReplicationResult, SummaryRow,
    TimingConfig, TimingReport,
};
pub use io::{
    dataset_csv, load_dataset_csv, parse_dataset_csv, resolve_model, results_csv,
    select_on_data, write_dataset_csv, write_results_csv, ModelSource, DEFAULT_SHRINK,
    RESULTS_CSV_HEADER,
};

/// Apply the `SEQCRT_THREADS` environment variable to the global worker
/// pool and return the effective worker count.
///
/// A positive integer caps the number of parallel workers; unset, empty, or
/// unparsable values leave the default (one worker per available core).
/// Calling this after the pool already exists has no effect, so executables
/// should call it before any parallel work.
pub fn configure_thread_pool() -> usize {
    if let Ok(raw) = std::env::var("SEQCRT_THREADS") {
        if let Ok(workers) = raw.trim().parse::<usize>() {
            if workers >= 1 {
                // Building the global pool can only succeed once; later
                // calls keep whatever pool already exists.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
            }
        }
    }
    rayon::current_num_threads()
}
