//! Result-table and dataset I/O, plus selection on data files.
//!
//! The result CSV has a fixed header and one row per replication; all
//! numbers are written in shortest round-trip form, so a run with
//! runtime recording off is byte-for-byte reproducible. Dataset files are
//! plain CSV with header `y,x1,...,xp`; parse errors carry 1-based line
//! numbers and name the offending column.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariates::{CovariateModel, CovariateModelConfig, GaussianModel};
use crate::crt::CrtConfig;
use crate::data::{Dataset, ResponseClass, Selection, SeqStepParams};
use crate::error::{Error, Result};
use crate::harness::experiment::{run_method, MethodKind, ReplicationResult};
use crate::rng::RngStream;

/// Column order of the experiment result table.
pub const RESULTS_CSV_HEADER: &str =
    "setting,family,n,p,k,amplitude,method,rep,fdp,power,n_selected,runtime_ms,seed";

/// Render result rows as CSV text (header line first, `\n` separators).
pub fn results_csv(rows: &[ReplicationResult]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(RESULTS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.setting,
            r.family,
            r.n,
            r.p,
            r.k,
            r.amplitude,
            r.method,
            r.rep,
            r.fdp,
            r.power,
            r.n_selected,
            r.runtime_ms,
            r.seed
        ));
    }
    out
}

/// Write result rows to a UTF-8 CSV file.
pub fn write_results_csv(rows: &[ReplicationResult], path: &Path) -> Result<()> {
    fs::write(path, results_csv(rows))?;
    Ok(())
}

/// Render a dataset as CSV with header `y,x1,...,xp`.
pub fn dataset_csv(dataset: &Dataset) -> String {
    let p = dataset.p();
    let mut out = String::new();
    out.push('y');
    for j in 1..=p {
        out.push_str(&format!(",x{j}"));
    }
    out.push('\n');
    for i in 0..dataset.n() {
        out.push_str(&format!("{}", dataset.y()[i]));
        for j in 0..p {
            out.push_str(&format!(",{}", dataset.x()[(i, j)]));
        }
        out.push('\n');
    }
    out
}

/// Write a dataset to a UTF-8 CSV file with header `y,x1,...,xp`.
pub fn write_dataset_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, dataset_csv(dataset))?;
    Ok(())
}

/// Load a dataset from a CSV file with header `y,x1,...,xp`.
///
/// The response class is inferred: a response taking only the values 0 and 1
/// is treated as binary, anything else as continuous. Errors carry the
/// 1-based line number (the header is line 1) and name the bad column.
pub fn load_dataset_csv(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse_dataset_csv(&text)
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::CsvParse { line, message: message.into() }
}

/// Parse dataset CSV text; see [`load_dataset_csv`].
pub fn parse_dataset_csv(text: &str) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());

    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(1, "empty file: expected header `y,x1,...,xp`"))?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names[0] != "y" {
        return Err(parse_error(
            1,
            format!("first column must be `y`, found `{}`", names[0]),
        ));
    }
    if names.len() < 2 {
        return Err(parse_error(1, "expected at least one covariate column `x1`"));
    }
    for (j, name) in names.iter().enumerate().skip(1) {
        let expected = format!("x{j}");
        if *name != expected {
            return Err(parse_error(
                1,
                format!("column {} must be `{expected}`, found `{name}`", j + 1),
            ));
        }
    }
    let p = names.len() - 1;

    let mut ys: Vec<f64> = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != p + 1 {
            return Err(parse_error(
                line_no,
                format!("expected {} fields, found {}", p + 1, fields.len()),
            ));
        }
        for (j, field) in fields.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| {
                parse_error(
                    line_no,
                    format!("column `{}`: cannot parse `{field}` as a number", names[j]),
                )
            })?;
            if j == 0 {
                ys.push(value);
            } else {
                xs.push(value);
            }
        }
    }
    if ys.is_empty() {
        return Err(parse_error(1, "expected at least one data row after the header"));
    }

    let n = ys.len();
    let x = DMatrix::from_fn(n, p, |i, j| xs[i * p + j]);
    let y = DVector::from_vec(ys);
    let class = if y.iter().all(|&v| v == 0.0 || v == 1.0) {
        ResponseClass::Binary
    } else {
        ResponseClass::Continuous
    };
    Dataset::new(x, y, class)
}

/// Default diagonal shrinkage used when fitting a covariate model to data.
pub const DEFAULT_SHRINK: f64 = 1e-3;

/// Where the covariate model for data-file selection comes from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ModelSource {
    /// An explicitly configured model; its dimension must match the data.
    Config { model: CovariateModelConfig },
    /// Fit a Gaussian model to the covariates: empirical mean and
    /// covariance with `shrink · I` added to the diagonal.
    FitGaussian {
        #[serde(default = "default_shrink")]
        shrink: f64,
    },
}

fn default_shrink() -> f64 {
    DEFAULT_SHRINK
}

/// Build the covariate model a data-file selection will resample from.
pub fn resolve_model(source: &ModelSource, dataset: &Dataset) -> Result<CovariateModel> {
    match source {
        ModelSource::Config { model } => model.build()?.with_row_length(dataset.p()),
        ModelSource::FitGaussian { shrink } => {
            Ok(CovariateModel::Gaussian(GaussianModel::fit_empirical(dataset.x(), *shrink)?))
        }
    }
}

/// Run one selection method on a fixed dataset.
///
/// This is the entry point behind the data-file CLI: the covariate model is
/// either supplied or fitted, then the chosen pipeline runs once.
pub fn select_on_data(
    dataset: &Dataset,
    source: &ModelSource,
    crt: &CrtConfig,
    params: &SeqStepParams,
    method: MethodKind,
    split_frac: f64,
    stream: &RngStream,
) -> Result<Selection> {
    let model = resolve_model(source, dataset)?;
    run_method(dataset, &model, crt, params, split_frac, method, stream)
}
