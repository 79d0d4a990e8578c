//! Multivariate normal covariate rows.
//!
//! The covariance is factorized once at construction: a Cholesky factor for
//! sampling and the precision matrix for conditionals. For AR(1) and block
//! structures the precision is sparse, so each conditional only touches the
//! neighbors of its variable; the resampling machinery calls `conditional`
//! O(n·p) times per dataset, which makes that locality worthwhile.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::ConditionalLaw;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Tag describing the sparsity pattern of the covariance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CovarianceStructure {
    /// `Σ_ij = ρ^|i−j|`, unit marginal variance; tridiagonal precision.
    Ar1 { rho: f64 },
    /// Block-diagonal with constant off-diagonal inside each block.
    Block { block_size: usize, off_diag: f64 },
    /// No structure assumed; conditionals touch all variables.
    General,
}

/// Rows i.i.d. `N(mean, covariance)`.
#[derive(Clone, Debug)]
pub struct GaussianModel {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    structure: CovarianceStructure,
    chol_l: DMatrix<f64>,
    precision: DMatrix<f64>,
}

impl GaussianModel {
    /// General model from explicit mean and covariance.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        Self::with_structure(mean, covariance, CovarianceStructure::General)
    }

    /// Zero-mean AR(1) model: `Σ_ij = ρ^|i−j|`.
    pub fn ar1(p: usize, rho: f64) -> Result<Self> {
        if rho.abs() >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "AR(1) correlation must satisfy |rho| < 1, got {rho}"
            )));
        }
        let cov = DMatrix::from_fn(p, p, |i, j| rho.powi((i as i32 - j as i32).abs()));
        Self::with_structure(DVector::zeros(p), cov, CovarianceStructure::Ar1 { rho })
    }

    /// Zero-mean block-diagonal model: unit diagonal, `off_diag` inside each
    /// block of `block_size` consecutive variables (last block may be short).
    pub fn block(p: usize, block_size: usize, off_diag: f64) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::InvalidParameter("block_size must be positive".into()));
        }
        let cov = DMatrix::from_fn(p, p, |i, j| {
            if i == j {
                1.0
            } else if i / block_size == j / block_size {
                off_diag
            } else {
                0.0
            }
        });
        Self::with_structure(
            DVector::zeros(p),
            cov,
            CovarianceStructure::Block { block_size, off_diag },
        )
    }

    fn with_structure(
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
        structure: CovarianceStructure,
    ) -> Result<Self> {
        let p = covariance.nrows();
        if p == 0 {
            return Err(Error::InvalidParameter("covariance must be non-empty".into()));
        }
        if covariance.ncols() != p || mean.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "mean length {} vs covariance {}x{}",
                mean.len(),
                p,
                covariance.ncols()
            )));
        }
        let asym = (&covariance - covariance.transpose()).abs().max();
        if asym > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "covariance not symmetric (max asymmetry {asym:.2e})"
            )));
        }
        let chol = Cholesky::new(covariance.clone()).ok_or_else(|| {
            Error::NotPositiveDefinite("Cholesky factorization failed".into())
        })?;
        let precision = chol.inverse();
        let chol_l = chol.unpack();
        Ok(Self { mean, covariance, structure, chol_l, precision })
    }

    /// Same covariance, different mean.
    pub fn with_mean(mut self, mean: DVector<f64>) -> Result<Self> {
        if mean.len() != self.p() {
            return Err(Error::DimensionMismatch(format!(
                "mean length {} vs p = {}",
                mean.len(),
                self.p()
            )));
        }
        self.mean = mean;
        Ok(self)
    }

    /// Empirical model fitted from data: sample mean and sample covariance
    /// with `ridge` added to the diagonal to keep the factorization stable.
    pub fn fit_empirical(x: &DMatrix<f64>, ridge: f64) -> Result<Self> {
        let n = x.nrows();
        if n < 2 {
            return Err(Error::InvalidParameter(
                "need at least 2 rows to fit a gaussian model".into(),
            ));
        }
        let p = x.ncols();
        let mean = DVector::from_fn(p, |j, _| x.column(j).sum() / n as f64);
        let mut cov = DMatrix::zeros(p, p);
        for i in 0..n {
            let centered = DVector::from_fn(p, |j, _| x[(i, j)] - mean[j]);
            cov += &centered * centered.transpose();
        }
        cov /= (n - 1) as f64;
        for j in 0..p {
            cov[(j, j)] += ridge;
        }
        Self::new(mean, cov)
    }

    pub fn p(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn structure(&self) -> CovarianceStructure {
        self.structure
    }

    /// Sample `n` i.i.d. rows as `mean + L·z`, `z ~ N(0, I)`.
    pub fn sample_rows(&self, n: usize, stream: &RngStream) -> DMatrix<f64> {
        let mut rng = stream.rng();
        let p = self.p();
        let mut out = DMatrix::zeros(n, p);
        let mut z = DVector::zeros(p);
        for i in 0..n {
            for k in 0..p {
                z[k] = rng.sample(StandardNormal);
            }
            let row = &self.mean + &self.chol_l * &z;
            for j in 0..p {
                out[(i, j)] = row[j];
            }
        }
        out
    }

    /// Law of `X_j` given the rest of `row` (`row[j]` is ignored):
    /// variance `1/Ω_jj`, mean `μ_j − (1/Ω_jj) Σ_{k≠j} Ω_jk (x_k − μ_k)`,
    /// where `Ω` is the precision matrix. Only structure neighbors of `j`
    /// enter the sum.
    pub fn conditional(&self, row: &[f64], j: usize) -> Result<ConditionalLaw> {
        let p = self.p();
        if row.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "row length {} vs p = {p}",
                row.len()
            )));
        }
        if j >= p {
            return Err(Error::InvalidParameter(format!("variable index {j} out of range")));
        }
        let variance = 1.0 / self.precision[(j, j)];
        let mut dot = 0.0;
        match self.structure {
            CovarianceStructure::Ar1 { .. } => {
                if j > 0 {
                    dot += self.precision[(j, j - 1)] * (row[j - 1] - self.mean[j - 1]);
                }
                if j + 1 < p {
                    dot += self.precision[(j, j + 1)] * (row[j + 1] - self.mean[j + 1]);
                }
            }
            CovarianceStructure::Block { block_size, .. } => {
                let start = (j / block_size) * block_size;
                let end = (start + block_size).min(p);
                for k in start..end {
                    if k != j {
                        dot += self.precision[(j, k)] * (row[k] - self.mean[k]);
                    }
                }
            }
            CovarianceStructure::General => {
                for k in 0..p {
                    if k != j {
                        dot += self.precision[(j, k)] * (row[k] - self.mean[k]);
                    }
                }
            }
        }
        Ok(ConditionalLaw::Gaussian { mean: self.mean[j] - variance * dot, variance })
    }

    /// Sampler for `X | Y = y` in the linear model `Y = Xᵀβ + N(0, noise_var)`.
    pub fn x_given_y_sampler(&self, beta: &DVector<f64>, noise_var: f64) -> Result<XGivenYSampler> {
        XGivenYSampler::new(self, beta, noise_var)
    }
}

/// Draws `X | Y = y` under jointly Gaussian `(X, Y)` with `Y = Xᵀβ + ε`.
///
/// `Y` then has variance `s = βᵀΣβ + noise_var`, the conditional mean is
/// `μ + Σβ (y − μᵀβ)/s`, and the conditional covariance `Σ − Σβ βᵀΣ / s`
/// does not depend on `y`, so its Cholesky factor is computed once.
#[derive(Clone, Debug)]
pub struct XGivenYSampler {
    base_mean: DVector<f64>,
    gain: DVector<f64>,
    mean_y: f64,
    cond_chol_l: DMatrix<f64>,
}

impl XGivenYSampler {
    pub fn new(model: &GaussianModel, beta: &DVector<f64>, noise_var: f64) -> Result<Self> {
        if noise_var <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        if beta.len() != model.p() {
            return Err(Error::DimensionMismatch(format!(
                "beta length {} vs p = {}",
                beta.len(),
                model.p()
            )));
        }
        let sigma_beta = model.covariance() * beta;
        let s = beta.dot(&sigma_beta) + noise_var;
        let cond_cov = model.covariance() - &sigma_beta * sigma_beta.transpose() / s;
        let chol = Cholesky::new(cond_cov).ok_or_else(|| {
            Error::NotPositiveDefinite("conditional covariance factorization failed".into())
        })?;
        Ok(Self {
            base_mean: model.mean().clone(),
            gain: sigma_beta / s,
            mean_y: model.mean().dot(beta),
            cond_chol_l: chol.unpack(),
        })
    }

    /// One draw of `X | Y = y`.
    pub fn sample(&self, y: f64, rng: &mut impl Rng) -> DVector<f64> {
        let p = self.base_mean.len();
        let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.base_mean + &self.gain * (y - self.mean_y) + &self.cond_chol_l * z
    }

    /// Rows `i = 1..n` drawn independently as `X | Y = ys[i]`.
    pub fn sample_matrix(&self, ys: &[f64], stream: &RngStream) -> DMatrix<f64> {
        let mut rng = stream.rng();
        let p = self.base_mean.len();
        let mut out = DMatrix::zeros(ys.len(), p);
        for (i, &y) in ys.iter().enumerate() {
            let row = self.sample(y, &mut rng);
            for j in 0..p {
                out[(i, j)] = row[j];
            }
        }
        out
    }
}
