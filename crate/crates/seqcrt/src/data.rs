//! Shared data types: datasets, p-value records, selection results.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether the response is continuous or 0/1-coded binary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseClass {
    Continuous,
    Binary,
}

/// A supervised dataset: `n x p` covariate matrix plus length-`n` response.
#[derive(Clone, Debug)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    response_class: ResponseClass,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, response_class: ResponseClass) -> Result<Self> {
        if x.nrows() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 samples, got {}",
                x.nrows()
            )));
        }
        if x.ncols() < 1 {
            return Err(Error::InvalidParameter("need at least 1 variable".into()));
        }
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "x has {} rows but y has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        if response_class == ResponseClass::Binary {
            if let Some(bad) = y.iter().find(|v| **v != 0.0 && **v != 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "binary response must be 0/1-coded, found {bad}"
                )));
            }
        }
        Ok(Self { x, y, response_class })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn response_class(&self) -> ResponseClass {
        self.response_class
    }

    /// Number of samples (rows).
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of variables (columns).
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// The dataset restricted to the given rows, in the given order.
    pub fn subset_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n()) {
            return Err(Error::InvalidParameter(format!(
                "row index {bad} out of range for {} rows",
                self.n()
            )));
        }
        let x = DMatrix::from_fn(rows.len(), self.p(), |i, j| self.x[(rows[i], j)]);
        let y = DVector::from_fn(rows.len(), |i, _| self.y[rows[i]]);
        Self::new(x, y, self.response_class)
    }
}

/// A randomization p-value for one variable.
///
/// With `B` resamples the p-value lives on the grid `{r/(B+1) : r = 1..B+1}`;
/// storing the integer rank `r` keeps threshold comparisons exact. The record
/// also carries the ordering score for the variable and the id of the stream
/// that produced the resamples, so any single p-value can be replayed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PValueRecord {
    /// 0-based variable index.
    pub variable: usize,
    /// Rank of the observed statistic among the `B + 1` copies, in `1..=B+1`.
    pub rank: u32,
    /// `B + 1`.
    pub denominator: u32,
    /// Ordering score (meaning depends on the pipeline; larger = more promising).
    pub score: f64,
    /// Stream id of the randomness that produced resamples and tie-breaks.
    pub stream_id: u64,
}

impl PValueRecord {
    /// The p-value `rank / denominator`.
    pub fn pvalue(&self) -> f64 {
        f64::from(self.rank) / f64::from(self.denominator)
    }

    /// Exact test of `p <= c` on the grid; see [`grid_rank_threshold`].
    pub fn at_most(&self, c: f64) -> bool {
        self.rank <= grid_rank_threshold(c, self.denominator)
    }
}

/// Largest rank `r` such that `r / denominator <= c`, robust to the float
/// representation of `c`.
///
/// `c * denominator` is snapped to the nearest integer when within `1e-9`
/// (e.g. `c = 0.1` with 10 copies gives exactly 1, not 0), otherwise rounded
/// down. A result of 0 means no grid p-value passes the threshold.
pub fn grid_rank_threshold(c: f64, denominator: u32) -> u32 {
    let t = c * f64::from(denominator);
    let snapped = if (t - t.round()).abs() < 1e-9 { t.round() } else { t.floor() };
    if snapped < 0.0 {
        0
    } else {
        snapped as u32
    }
}

/// Parameters of the sequential selection filter: working p-value threshold
/// `c` and target FDR level `q`, both in `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeqStepParams {
    c: f64,
    q: f64,
}

impl SeqStepParams {
    pub fn new(c: f64, q: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold c must lie in (0,1), got {c}"
            )));
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "FDR level q must lie in (0,1), got {q}"
            )));
        }
        Ok(Self { c, q })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// The stepwise stopping threshold `(1 - c) / c * q` compared against the
    /// running ratio of above-`c` to below-`c` counts.
    pub fn ratio_threshold(&self) -> f64 {
        (1.0 - self.c) / self.c * self.q
    }
}

/// Outcome of the sequential selection filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Length of the accepted prefix of the ordering (0 = nothing selected).
    pub k_hat: usize,
    /// Selected variables as 0-based original indices, ascending.
    pub selected: Vec<usize>,
    /// Running ratio `(1 + #above-c) / max(#below-c, 1)` after each prefix.
    pub ratio_trace: Vec<f64>,
}

impl Selection {
    /// An empty selection over `p` variables (trace of all-above-threshold).
    pub fn empty(ratio_trace: Vec<f64>) -> Self {
        Self { k_hat: 0, selected: Vec::new(), ratio_trace }
    }
}
