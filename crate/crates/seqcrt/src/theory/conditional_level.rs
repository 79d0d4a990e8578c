//! Monte Carlo diagnostic for the almost-independent FDR bound: estimates,
//! per null variable, the probability that its randomization p-value falls
//! below the threshold `c` conditionally on the response and on the
//! below-threshold indicators of its in-block neighbors. Under a
//! block-diagonal covariate model the indicators of other blocks are
//! conditionally independent of the variable, so only the at most `2^(K-1)`
//! in-block neighbor configurations matter and the level can be estimated
//! by sample proportions.
//!
//! Each outer replicate draws one observed dataset, realizes the neighbor
//! configuration of every null variable from it, and estimates the level at
//! that realized configuration from conditional redraws of the covariates.
//! The per-replicate maximum over nulls is the quantity whose distribution
//! calibrates the `(delta, epsilon)` pair of
//! [`bound_almost_independent`](crate::theory::bound_almost_independent).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariates::{CovarianceStructure, CovariateModel, GaussianModel};
use crate::crt::{crt_all_variables, CrtConfig, CrtMode};
use crate::data::{Dataset, ResponseClass};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats::{Neighborhoods, ScoreKind, StatisticKind};

/// Largest supported block size; configurations grow as `2^(K-1)`.
const MAX_BLOCK_SIZE: usize = 12;

/// Settings for the conditional-level estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionalLevelConfig {
    /// Number of observations per replicate.
    pub n: usize,
    /// Linear-model coefficients; zeros mark the null variables.
    pub beta: Vec<f64>,
    /// Response noise variance.
    pub noise_var: f64,
    /// Randomization-test settings used to produce the p-values.
    pub crt: CrtConfig,
    /// Below-threshold level of the filter.
    pub c: f64,
    /// Conditional redraws of the covariates per replicate.
    pub inner_reps: usize,
    /// Replicates, each contributing one maximum conditional level.
    pub outer_reps: usize,
    /// Tail probability used to turn the histogram into `(delta, epsilon)`.
    pub tail: f64,
    /// Hold the response fixed within a replicate (the default) or redraw
    /// it with the covariates on every inner draw, which estimates the
    /// response-free variant of the conditional level.
    pub condition_on_response: bool,
    /// Condition every replicate on this response instead of drawing a
    /// fresh one; length must equal `n`.
    pub response_fixed: Option<Vec<f64>>,
}

impl ConditionalLevelConfig {
    pub fn new(n: usize, beta: Vec<f64>, noise_var: f64) -> Self {
        Self {
            n,
            beta,
            noise_var,
            crt: CrtConfig {
                b: 19,
                mode: CrtMode::Original,
                statistic: StatisticKind::AbsCorrelation,
                score: ScoreKind::MaxStat,
            },
            c: 0.3,
            inner_reps: 2000,
            outer_reps: 50,
            tail: 0.005,
            condition_on_response: true,
            response_fixed: None,
        }
    }
}

/// Estimated conditional levels and the `(delta, epsilon)` they suggest.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionalLevelReport {
    pub c: f64,
    pub tail: f64,
    /// One maximum (over null variables, at their realized neighbor
    /// configurations) per replicate.
    pub max_levels: Vec<f64>,
    /// `(1 - tail)` empirical quantile of `max_levels`, minus `c`, floored
    /// at zero.
    pub suggested_delta: f64,
    /// Equal to the configured tail probability.
    pub suggested_epsilon: f64,
    /// Realized conditioning configurations that no inner draw matched,
    /// summed over replicates; the affected variables are excluded from
    /// that replicate's maximum.
    pub empty_cells: usize,
    /// Distinct neighbor configurations per variable (`2^(K-1)`).
    pub cells_per_variable: usize,
    pub n_nulls: usize,
}

/// Estimate the per-replicate maximum conditional level under a
/// block-diagonal Gaussian covariate model with a linear Gaussian response.
pub fn estimate_conditional_levels(
    model: &GaussianModel,
    cfg: &ConditionalLevelConfig,
    stream: &RngStream,
) -> Result<ConditionalLevelReport> {
    let p = model.p();
    let block_size = match model.structure() {
        CovarianceStructure::Block { block_size, .. } => block_size,
        other => {
            return Err(Error::InvalidParameter(format!(
                "needs a block-diagonal covariate model, got {other:?}"
            )))
        }
    };
    if block_size > MAX_BLOCK_SIZE {
        return Err(Error::InvalidParameter(format!(
            "block size {block_size} exceeds the supported maximum {MAX_BLOCK_SIZE}"
        )));
    }
    if cfg.beta.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "beta length {} vs p = {p}",
            cfg.beta.len()
        )));
    }
    if !(cfg.c > 0.0 && cfg.c < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "c must lie in (0, 1), got {}",
            cfg.c
        )));
    }
    if !(cfg.noise_var > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise variance must be positive, got {}",
            cfg.noise_var
        )));
    }
    if !(cfg.tail > 0.0 && cfg.tail < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "tail must lie in (0, 0.5), got {}",
            cfg.tail
        )));
    }
    if cfg.n < 2 || cfg.inner_reps == 0 || cfg.outer_reps == 0 {
        return Err(Error::InvalidParameter(
            "need n >= 2 and positive inner and outer replicate counts".into(),
        ));
    }
    cfg.crt.validate()?;
    if let Some(y) = &cfg.response_fixed {
        if y.len() != cfg.n {
            return Err(Error::DimensionMismatch(format!(
                "fixed response length {} vs n = {}",
                y.len(),
                cfg.n
            )));
        }
        if !cfg.condition_on_response {
            return Err(Error::InvalidParameter(
                "a fixed response requires conditioning on the response".into(),
            ));
        }
    }

    let nulls: Vec<usize> = (0..p).filter(|&j| cfg.beta[j] == 0.0).collect();
    if nulls.is_empty() {
        return Err(Error::InvalidParameter(
            "no null variables: every coefficient is nonzero".into(),
        ));
    }
    let neighborhoods = Neighborhoods::Blocks { block_size };
    let neighbor_lists: Vec<Vec<usize>> = nulls
        .iter()
        .map(|&j| neighborhoods.neighbors(j, p))
        .collect::<Result<_>>()?;
    let cells_per_variable = 1usize << (block_size - 1);

    let beta = DVector::from_column_slice(&cfg.beta);
    let noise_sd = cfg.noise_var.sqrt();
    let cov_model = CovariateModel::Gaussian(model.clone());
    let sampler = if cfg.condition_on_response {
        Some(model.x_given_y_sampler(&beta, cfg.noise_var)?)
    } else {
        None
    };

    let draw_response = |x: &DMatrix<f64>, stream: &RngStream| {
        let mut rng = stream.rng();
        DVector::from_fn(cfg.n, |i, _| {
            let mut dot = 0.0;
            for j in 0..p {
                dot += x[(i, j)] * beta[j];
            }
            dot + noise_sd * rng.sample::<f64, _>(StandardNormal)
        })
    };
    let below_flags = |dataset: &Dataset, stream: &RngStream| -> Result<Vec<bool>> {
        let records = crt_all_variables(dataset, &cov_model, &cfg.crt, stream)?;
        let mut below = vec![false; p];
        for record in &records {
            below[record.variable] = record.at_most(cfg.c);
        }
        Ok(below)
    };
    let configuration = |below: &[bool], neighbors: &[usize]| -> usize {
        neighbors
            .iter()
            .enumerate()
            .fold(0, |cell, (bit, &nb)| cell | ((below[nb] as usize) << bit))
    };

    let per_rep: Vec<(f64, usize)> = (0..cfg.outer_reps)
        .into_par_iter()
        .map(|rep| -> Result<(f64, usize)> {
            let rep_stream = stream.child(rep as u64);

            // Observed dataset for this replicate; its p-values realize the
            // neighbor configuration at which each level is evaluated.
            let (x_obs, y_outer) = match &cfg.response_fixed {
                Some(y) => {
                    let y = DVector::from_column_slice(y);
                    let sampler = sampler.as_ref().expect("validated above");
                    let x = sampler.sample_matrix(y.as_slice(), &rep_stream.child(0));
                    (x, y)
                }
                None => {
                    let x = model.sample_rows(cfg.n, &rep_stream.child(0));
                    let y = draw_response(&x, &rep_stream.child(1));
                    (x, y)
                }
            };
            let observed = Dataset::new(x_obs, y_outer.clone(), ResponseClass::Continuous)?;
            let below_obs = below_flags(&observed, &rep_stream.child(3))?;
            let realized: Vec<usize> = neighbor_lists
                .iter()
                .map(|neighbors| configuration(&below_obs, neighbors))
                .collect();

            let mut matched = vec![0u32; nulls.len()];
            let mut hits = vec![0u32; nulls.len()];
            let inner_stream = rep_stream.child(2);
            for draw in 0..cfg.inner_reps {
                let draw_stream = inner_stream.child(draw as u64);
                let (x, y) = match &sampler {
                    Some(sampler) => (
                        sampler.sample_matrix(y_outer.as_slice(), &draw_stream.child(0)),
                        y_outer.clone(),
                    ),
                    None => {
                        let x = model.sample_rows(cfg.n, &draw_stream.child(0));
                        let y = draw_response(&x, &draw_stream.child(2));
                        (x, y)
                    }
                };
                let dataset = Dataset::new(x, y, ResponseClass::Continuous)?;
                let below = below_flags(&dataset, &draw_stream.child(1))?;
                for (slot, &j) in nulls.iter().enumerate() {
                    if configuration(&below, &neighbor_lists[slot]) == realized[slot] {
                        matched[slot] += 1;
                        hits[slot] += below[j] as u32;
                    }
                }
            }

            let mut max_level = f64::NEG_INFINITY;
            let mut empty = 0usize;
            for (&count, &hit) in matched.iter().zip(&hits) {
                if count == 0 {
                    empty += 1;
                } else {
                    max_level = max_level.max(hit as f64 / count as f64);
                }
            }
            if empty == nulls.len() {
                return Err(Error::NonConvergence(format!(
                    "no inner draw matched any realized configuration in replicate {rep}; \
                     increase inner_reps"
                )));
            }
            Ok((max_level, empty))
        })
        .collect::<Result<_>>()?;

    let max_levels: Vec<f64> = per_rep.iter().map(|&(level, _)| level).collect();
    let empty_cells = per_rep.iter().map(|&(_, empty)| empty).sum();
    let mut sorted = max_levels.clone();
    sorted.sort_by(f64::total_cmp);
    let index = (((1.0 - cfg.tail) * sorted.len() as f64).ceil() as usize)
        .clamp(1, sorted.len())
        - 1;
    let quantile = sorted[index];
    Ok(ConditionalLevelReport {
        c: cfg.c,
        tail: cfg.tail,
        max_levels,
        suggested_delta: (quantile - cfg.c).max(0.0),
        suggested_epsilon: cfg.tail,
        empty_cells,
        cells_per_variable,
        n_nulls: nulls.len(),
    })
}
