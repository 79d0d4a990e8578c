//! Variable-importance statistics and symmetric resampling scores.
//!
//! A statistic measures how much a probed column (or each of several
//! resampled copies of it) explains the response, given the rest of the
//! design. Three families are provided: absolute marginal correlation,
//! the absolute coefficient in a small neighborhood regression, and the
//! absolute coefficient of a cross-validated penalized fit. Every family
//! comes in two forms:
//!
//! * [`statistic_single`] scores one probe column at a time;
//! * [`statistic_oneshot`] scores all resampled copies with a single joint
//!   fit and is permutation-equivariant in the copies: reordering the copy
//!   columns reorders the outputs and changes nothing else.
//!
//! [`symmetric_score`] condenses the per-copy statistics of one variable
//! into a single ordering score and is exactly invariant under permutations
//! of its input.

mod elastic_net;

pub use elastic_net::{
    cv_elastic_net, cv_fold_assignment, elastic_net_fit, elastic_net_fit_traced, CvFit,
    LassoParams,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::ResponseClass;
use crate::error::{Error, Result};
use crate::rng::RngStream;

use elastic_net::collapse_duplicates;

/// Ridge added to the neighborhood-regression normal equations so collinear
/// neighborhoods stay solvable.
const OLS_RIDGE: f64 = 1e-8;

/// Which variables form the local neighborhood of each variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Neighborhoods {
    /// Contiguous blocks of a fixed size: the neighborhood of `j` is the rest
    /// of its block.
    Blocks { block_size: usize },
    /// An explicit index set per variable (0-based; a self-index is ignored).
    Explicit(Vec<Vec<usize>>),
}

impl Neighborhoods {
    /// Neighbor indices of `j` among `p` variables, ascending, without `j`.
    pub fn neighbors(&self, j: usize, p: usize) -> Result<Vec<usize>> {
        if j >= p {
            return Err(Error::InvalidParameter(format!(
                "variable index {j} out of range for {p} variables"
            )));
        }
        match self {
            Neighborhoods::Blocks { block_size } => {
                if *block_size == 0 {
                    return Err(Error::InvalidParameter("block_size must be positive".into()));
                }
                let start = (j / block_size) * block_size;
                let end = (start + block_size).min(p);
                Ok((start..end).filter(|&k| k != j).collect())
            }
            Neighborhoods::Explicit(sets) => {
                let set = sets.get(j).ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "no neighborhood listed for variable {j} (got {} sets)",
                        sets.len()
                    ))
                })?;
                let mut out: Vec<usize> = Vec::with_capacity(set.len());
                for &k in set {
                    if k >= p {
                        return Err(Error::InvalidParameter(format!(
                            "neighbor index {k} of variable {j} out of range for {p} variables"
                        )));
                    }
                    if k != j {
                        out.push(k);
                    }
                }
                out.sort_unstable();
                out.dedup();
                Ok(out)
            }
        }
    }
}

/// The importance statistic to evaluate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StatisticKind {
    /// Absolute sample correlation between the probe and the response.
    AbsCorrelation,
    /// Absolute probe coefficient when the response is regressed (with an
    /// intercept) on the probe plus the probed variable's neighbors.
    NeighborhoodOls { neighborhoods: Neighborhoods },
    /// Absolute probe coefficient of a cross-validated penalized fit on the
    /// probe plus the whole rest of the design; squared-error loss for
    /// continuous responses, logistic loss for binary ones.
    LassoCoefficient {
        #[serde(default)]
        params: LassoParams,
    },
}

/// How to fold the per-copy statistics of one variable into one score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// The largest per-copy statistic.
    MaxStat,
    /// The largest statistic minus the (lower) median statistic.
    MaxMinusMedian,
}

/// Condense per-copy statistics into one score; exactly invariant under any
/// permutation of `stats`. For even counts the lower median is used.
pub fn symmetric_score(kind: ScoreKind, stats: &[f64]) -> f64 {
    assert!(!stats.is_empty(), "symmetric_score needs at least one statistic");
    let mut sorted = stats.to_vec();
    sorted.sort_by(f64::total_cmp);
    let max = sorted[sorted.len() - 1];
    match kind {
        ScoreKind::MaxStat => max,
        ScoreKind::MaxMinusMedian => max - sorted[(sorted.len() - 1) / 2],
    }
}

/// Everything a statistic sees besides the probe column(s).
#[derive(Clone, Copy, Debug)]
pub struct StatisticInput<'a> {
    /// Index of the probed variable in the full design (0-based); used to
    /// resolve neighborhoods.
    pub variable: usize,
    /// The design with the probed column removed, remaining columns in their
    /// original order.
    pub x_rest: &'a DMatrix<f64>,
    /// The response.
    pub y: &'a DVector<f64>,
    /// Whether `y` is continuous or 0/1.
    pub response: ResponseClass,
    /// Seeds the cross-validation fold assignment; ignored by statistics
    /// without cross-validation. Fixing it per variable keeps every fit a
    /// deterministic function of its inputs.
    pub cv_stream: RngStream,
}

impl StatisticInput<'_> {
    fn check(&self, probe_len: usize) -> Result<()> {
        let n = self.y.len();
        if probe_len != n || self.x_rest.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "probe has {probe_len} rows, y has {n}, rest of design has {}",
                self.x_rest.nrows()
            )));
        }
        if self.variable > self.x_rest.ncols() {
            return Err(Error::InvalidParameter(format!(
                "variable index {} out of range for {} variables",
                self.variable,
                self.x_rest.ncols() + 1
            )));
        }
        Ok(())
    }

    /// Column index of original variable `k` inside `x_rest`.
    fn rest_index(&self, k: usize) -> usize {
        if k < self.variable {
            k
        } else {
            k - 1
        }
    }

    fn neighbor_columns(&self, neighborhoods: &Neighborhoods) -> Result<Vec<Vec<f64>>> {
        let p_full = self.x_rest.ncols() + 1;
        let neighbors = neighborhoods.neighbors(self.variable, p_full)?;
        Ok(neighbors
            .iter()
            .map(|&k| column_vec(self.x_rest, self.rest_index(k)))
            .collect())
    }
}

/// Score one probe column. Zero-variance probes score 0 (with a logged
/// warning) rather than failing.
pub fn statistic_single(
    kind: &StatisticKind,
    probe: &DVector<f64>,
    input: &StatisticInput<'_>,
) -> Result<f64> {
    input.check(probe.len())?;
    match kind {
        StatisticKind::AbsCorrelation => Ok(abs_correlation(probe.as_slice(), input.y.as_slice())),
        StatisticKind::NeighborhoodOls { neighborhoods } => {
            if is_zero_variance(probe.as_slice()) {
                log::warn!(
                    "probe for variable {} has zero variance; statistic set to 0",
                    input.variable
                );
                return Ok(0.0);
            }
            let probes = vec![probe.as_slice().to_vec()];
            let coefs =
                ridge_ols_probe_coefficients(&probes, &input.neighbor_columns(neighborhoods)?, input.y)?;
            Ok(coefs[0])
        }
        StatisticKind::LassoCoefficient { params } => {
            let design = prepend_columns(std::slice::from_ref(probe), input.x_rest);
            let fit = cv_elastic_net(&design, input.y, input.response, params, &input.cv_stream)?;
            Ok(fit.coefficients[0].abs())
        }
    }
}

/// Score all resampled copies of one variable with a single joint fit.
///
/// `copies` holds the observed column and its resamples side by side
/// (n × (B+1)). The output has one entry per copy, and permuting the copy
/// columns permutes the outputs identically (within numerical tolerance of
/// the fit; exactly for correlations).
pub fn statistic_oneshot(
    kind: &StatisticKind,
    copies: &DMatrix<f64>,
    input: &StatisticInput<'_>,
) -> Result<Vec<f64>> {
    input.check(copies.nrows())?;
    let m = copies.ncols();
    if m < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least two copies (observed + one resample), got {m}"
        )));
    }
    match kind {
        StatisticKind::AbsCorrelation => Ok((0..m)
            .map(|b| abs_correlation(copies.column(b).as_slice(), input.y.as_slice()))
            .collect()),
        StatisticKind::NeighborhoodOls { neighborhoods } => {
            let probes: Vec<Vec<f64>> = (0..m).map(|b| column_vec(copies, b)).collect();
            ridge_ols_probe_coefficients(
                &probes,
                &input.neighbor_columns(neighborhoods)?,
                input.y,
            )
        }
        StatisticKind::LassoCoefficient { params } => {
            let copy_vectors: Vec<DVector<f64>> =
                (0..m).map(|b| DVector::from_column_slice(copies.column(b).as_slice())).collect();
            let design = prepend_columns(&copy_vectors, input.x_rest);
            let fit = cv_elastic_net(&design, input.y, input.response, params, &input.cv_stream)?;
            Ok((0..m).map(|b| fit.coefficients[b].abs()).collect())
        }
    }
}

/// `[probes… | rest]` as one matrix.
fn prepend_columns(probes: &[DVector<f64>], rest: &DMatrix<f64>) -> DMatrix<f64> {
    let n = rest.nrows();
    let m = probes.len();
    let mut out = DMatrix::zeros(n, m + rest.ncols());
    for (b, probe) in probes.iter().enumerate() {
        out.set_column(b, probe);
    }
    for k in 0..rest.ncols() {
        out.set_column(m + k, &rest.column(k));
    }
    out
}

fn column_vec(m: &DMatrix<f64>, j: usize) -> Vec<f64> {
    m.column(j).as_slice().to_vec()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Centered sum of squares treated as zero when it is at rounding scale for
/// the column's magnitude (a truly constant column can acquire a tiny
/// nonzero value purely from the mean subtraction).
fn is_zero_variance(x: &[f64]) -> bool {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    ss <= n * (1e-12 * (mean.abs() + 1.0)).powi(2)
}

/// |sample correlation|; 0 when either argument has (numerically) zero
/// variance, with a logged warning.
fn abs_correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let floor_x = n * (1e-12 * (mx.abs() + 1.0)).powi(2);
    let floor_y = n * (1e-12 * (my.abs() + 1.0)).powi(2);
    if sxx <= floor_x || syy <= floor_y {
        log::warn!("zero-variance input to correlation statistic; statistic set to 0");
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).abs()
}

/// Absolute coefficients of the probe columns in a ridge-stabilized
/// least-squares regression of `y` on `[intercept, probes…, neighbors…]`.
///
/// Bitwise-duplicate columns are collapsed and their group total split
/// equally (the symmetric unique minimizer), which keeps exact duplicate
/// probes exactly exchangeable and the normal equations well conditioned.
fn ridge_ols_probe_coefficients(
    probes: &[Vec<f64>],
    neighbors: &[Vec<f64>],
    y: &DVector<f64>,
) -> Result<Vec<f64>> {
    let n = y.len();
    let n_f = n as f64;
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(1 + probes.len() + neighbors.len());
    cols.push(vec![1.0; n]);
    cols.extend(probes.iter().cloned());
    cols.extend(neighbors.iter().cloned());
    let (groups, reduced) = collapse_duplicates(&cols);
    let d = reduced.len();
    let mut gram = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let v = dot(&reduced[a], &reduced[b]) / n_f;
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    for a in 0..d {
        gram[(a, a)] += OLS_RIDGE / groups.sizes[a];
    }
    let rhs = DVector::from_fn(d, |a, _| dot(&reduced[a], y.as_slice()) / n_f);
    let chol = gram.cholesky().ok_or_else(|| {
        Error::NotPositiveDefinite(
            "neighborhood regression normal equations are not positive definite".into(),
        )
    })?;
    let solution = chol.solve(&rhs);
    let expanded = groups.expand(solution.as_slice());
    Ok((0..probes.len()).map(|k| expanded[1 + k].abs()).collect())
}
