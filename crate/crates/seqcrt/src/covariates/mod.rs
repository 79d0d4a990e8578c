//! Generative covariate models with exact single-column conditionals.
//!
//! The resampling step of the randomization test needs, for every variable
//! `j`, the conditional law of `X_j` given the other entries of its row. Two
//! model families provide this exactly:
//!
//! * [`GaussianModel`] — multivariate normal rows with AR(1), block, or
//!   general covariance; conditionals come from a precomputed precision
//!   matrix, and the Gaussian-linear pair `(X, Y)` can also be sampled the
//!   other way around (`X | Y`).
//! * [`HmmModel`] — discrete rows emitted by a hidden Markov chain;
//!   conditionals come from forward/backward messages.

mod gaussian;
mod hmm;

pub use gaussian::{GaussianModel, CovarianceStructure, XGivenYSampler};
pub use hmm::HmmModel;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Exact law of one entry given the rest of its row.
#[derive(Clone, Debug, PartialEq)]
pub enum ConditionalLaw {
    Gaussian { mean: f64, variance: f64 },
    /// Discrete law over the model's output alphabet.
    Categorical { values: Vec<f64>, probs: Vec<f64> },
}

impl ConditionalLaw {
    /// Draw one value from the law.
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            ConditionalLaw::Gaussian { mean, variance } => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                mean + variance.sqrt() * z
            }
            ConditionalLaw::Categorical { values, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().expect("non-empty alphabet")
            }
        }
    }
}

/// A covariate model of either family, behind one resampling interface.
#[derive(Clone, Debug)]
pub enum CovariateModel {
    Gaussian(GaussianModel),
    Hmm(HmmModel),
}

impl CovariateModel {
    /// Number of variables per row.
    pub fn p(&self) -> usize {
        match self {
            CovariateModel::Gaussian(m) => m.p(),
            CovariateModel::Hmm(m) => m.p(),
        }
    }

    /// Sample an `n x p` matrix of i.i.d. rows.
    pub fn sample_rows(&self, n: usize, stream: &RngStream) -> DMatrix<f64> {
        match self {
            CovariateModel::Gaussian(m) => m.sample_rows(n, stream),
            CovariateModel::Hmm(m) => m.sample_rows(n, stream),
        }
    }

    /// Law of entry `j` given the other entries of `row` (`row[j]` is ignored).
    pub fn conditional(&self, row: &[f64], j: usize) -> Result<ConditionalLaw> {
        match self {
            CovariateModel::Gaussian(m) => m.conditional(row, j),
            CovariateModel::Hmm(m) => m.conditional(row, j),
        }
    }

    /// Conditional laws of every entry of `row` given the others.
    ///
    /// Equivalent to calling [`CovariateModel::conditional`] for each `j`, but
    /// the HMM path shares one forward/backward sweep across all positions.
    pub fn conditionals_row(&self, row: &[f64]) -> Result<Vec<ConditionalLaw>> {
        match self {
            CovariateModel::Gaussian(m) => {
                (0..m.p()).map(|j| m.conditional(row, j)).collect()
            }
            CovariateModel::Hmm(m) => m.conditionals_row(row),
        }
    }
}

/// JSON description of a covariate model.
///
/// ```json
/// {"type": "gaussian", "p": 300, "structure": {"kind": "ar1", "rho": 0.5}}
/// {"type": "gaussian", "p": 120, "structure": {"kind": "block", "block_size": 3, "off_diag": 0.3}}
/// {"type": "gaussian", "mean": [0, 0], "covariance": [[1, 0.2], [0.2, 1]]}
/// {"type": "hmm"}
/// ```
///
/// A `gaussian` entry gives either an explicit `covariance` (with optional
/// `mean`, default zero) or a `p` plus a `structure` to build one. An `hmm`
/// entry with no fields is the default five-state chain over `{1, 2, 3}`;
/// explicit `transition` / `emission` / `initial` / `output_alphabet` fields
/// override it as a group.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CovariateModelConfig {
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mean: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        covariance: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        structure: Option<StructureConfig>,
    },
    Hmm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        transition: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        emission: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        output_alphabet: Option<Vec<f64>>,
    },
}

/// Structured-covariance part of the gaussian model config.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructureConfig {
    Ar1 { rho: f64 },
    Block { block_size: usize, off_diag: f64 },
}

impl CovariateModelConfig {
    /// Validate and build the model.
    pub fn build(&self) -> Result<CovariateModel> {
        match self {
            CovariateModelConfig::Gaussian { p, mean, covariance, structure } => {
                let model = match (covariance, structure) {
                    (Some(rows), None) => {
                        let cov = matrix_from_rows(rows)?;
                        let mean = match mean {
                            Some(m) => nalgebra::DVector::from_vec(m.clone()),
                            None => nalgebra::DVector::zeros(cov.nrows()),
                        };
                        GaussianModel::new(mean, cov)?
                    }
                    (None, Some(st)) => {
                        let p = p.ok_or_else(|| {
                            Error::InvalidParameter(
                                "gaussian model with a structure needs `p`".into(),
                            )
                        })?;
                        let mut model = match st {
                            StructureConfig::Ar1 { rho } => GaussianModel::ar1(p, *rho)?,
                            StructureConfig::Block { block_size, off_diag } => {
                                GaussianModel::block(p, *block_size, *off_diag)?
                            }
                        };
                        if let Some(m) = mean {
                            model = model.with_mean(nalgebra::DVector::from_vec(m.clone()))?;
                        }
                        model
                    }
                    _ => {
                        return Err(Error::InvalidParameter(
                            "gaussian model needs exactly one of `covariance` or `structure`"
                                .into(),
                        ))
                    }
                };
                Ok(CovariateModel::Gaussian(model))
            }
            CovariateModelConfig::Hmm { transition, emission, initial, output_alphabet } => {
                let model = match (transition, emission, initial, output_alphabet) {
                    (None, None, None, None) => HmmModel::simulation_default(),
                    (Some(t), Some(e), Some(i), Some(a)) => HmmModel::new(
                        matrix_from_rows(t)?,
                        matrix_from_rows(e)?,
                        nalgebra::DVector::from_vec(i.clone()),
                        a.clone(),
                    )?,
                    _ => {
                        return Err(Error::InvalidParameter(
                            "hmm model needs either no matrices (default) or all of \
                             transition/emission/initial/output_alphabet"
                                .into(),
                        ))
                    }
                };
                Ok(CovariateModel::Hmm(model))
            }
        }
    }
}

/// The HMM config carries no length: the row length must be supplied by the
/// caller (experiment configs carry `p` separately). This helper applies it.
impl CovariateModel {
    pub fn with_row_length(self, p: usize) -> Result<Self> {
        match self {
            CovariateModel::Hmm(m) => Ok(CovariateModel::Hmm(m.with_row_length(p)?)),
            CovariateModel::Gaussian(m) => {
                if m.p() != p {
                    return Err(Error::DimensionMismatch(format!(
                        "gaussian model has p = {}, experiment wants p = {}",
                        m.p(),
                        p
                    )));
                }
                Ok(CovariateModel::Gaussian(m))
            }
        }
    }
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("empty matrix in config".into()));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidParameter("ragged matrix in config".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_config_roundtrip() {
        let json = r#"{"type":"gaussian","p":4,"structure":{"kind":"ar1","rho":0.5}}"#;
        let cfg: CovariateModelConfig = serde_json::from_str(json).unwrap();
        let model = cfg.build().unwrap();
        assert_eq!(model.p(), 4);
        match model {
            CovariateModel::Gaussian(m) => {
                assert!((m.covariance()[(0, 1)] - 0.5).abs() < 1e-12);
                assert!((m.covariance()[(0, 3)] - 0.125).abs() < 1e-12);
            }
            _ => panic!("expected gaussian"),
        }
    }

    #[test]
    fn hmm_default_config() {
        let cfg: CovariateModelConfig = serde_json::from_str(r#"{"type":"hmm"}"#).unwrap();
        let model = cfg.build().unwrap().with_row_length(7).unwrap();
        assert_eq!(model.p(), 7);
    }

    #[test]
    fn gaussian_config_rejects_ambiguous_input() {
        let json = r#"{"type":"gaussian","p":4}"#;
        let cfg: CovariateModelConfig = serde_json::from_str(json).unwrap();
        assert!(cfg.build().is_err());
    }

    #[test]
    fn explicit_covariance_config() {
        let json = r#"{"type":"gaussian","covariance":[[1.0,0.2],[0.2,1.0]]}"#;
        let model = serde_json::from_str::<CovariateModelConfig>(json)
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(model.p(), 2);
    }

    #[test]
    fn categorical_sampling_respects_probabilities() {
        let law = ConditionalLaw::Categorical {
            values: vec![1.0, 2.0, 3.0],
            probs: vec![0.5, 0.25, 0.25],
        };
        let mut rng = crate::rng::RngStream::root(11).rng();
        let n = 40_000;
        let mut count_one = 0;
        for _ in 0..n {
            if law.sample(&mut rng) == 1.0 {
                count_one += 1;
            }
        }
        let freq = f64::from(count_one) / n as f64;
        assert!((freq - 0.5).abs() < 0.01, "freq = {freq}");
    }
}
