//! Synthetic response generators with seeded nonnull-support selection.
//!
//! Four response settings are implemented for each covariate family:
//! a linear-Gaussian model, a logistic model, a nonlinear pair-interaction
//! model, and a logistic model on binarized covariates. Signal strength is an
//! amplitude `A`; nonzero coefficients equal `A/√n`. Family conventions
//! (link centering, indicator thresholds, the binarizing transform) are
//! explicit fields with per-family constructors, so continuous Gaussian rows
//! and discrete `{1,2,3}` rows both get well-posed formulas.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::ResponseClass;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Which of the four response settings to generate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Linear,
    Logistic,
    NonlinearPairs,
    NonlinearBinary,
}

impl ResponseKind {
    /// Continuous for the additive-noise settings, binary for the logistic ones.
    pub fn response_class(&self) -> ResponseClass {
        match self {
            ResponseKind::Linear | ResponseKind::NonlinearPairs => ResponseClass::Continuous,
            ResponseKind::Logistic | ResponseKind::NonlinearBinary => ResponseClass::Binary,
        }
    }
}

/// Covariate transform used by the binarized-logistic setting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BinaryTransform {
    /// `x̃ = sign(x)` (continuous families).
    Sign,
    /// `x̃ = 1{x > threshold} − offset` (discrete families).
    ShiftedIndicator { threshold: f64, offset: f64 },
}

impl BinaryTransform {
    fn apply(&self, x: f64) -> f64 {
        match self {
            BinaryTransform::Sign => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            BinaryTransform::ShiftedIndicator { threshold, offset } => {
                f64::from(x > *threshold) - offset
            }
        }
    }
}

/// Nonnull support: either a flat index set or disjoint interaction pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Plain(Vec<usize>),
    /// `left[i]` interacts with `right[i]`; all indices distinct.
    Pairs { left: Vec<usize>, right: Vec<usize> },
}

impl Support {
    /// Draw `k` distinct indices uniformly from `0..p`.
    pub fn draw_plain(p: usize, k: usize, stream: &RngStream) -> Result<Self> {
        if k > p {
            return Err(Error::InvalidParameter(format!("k = {k} exceeds p = {p}")));
        }
        let mut rng = stream.rng();
        let mut idx: Vec<usize> = rand::seq::index::sample(&mut rng, p, k).into_vec();
        idx.sort_unstable();
        Ok(Support::Plain(idx))
    }

    /// Draw `k` distinct indices and pair them off (`k` must be even).
    pub fn draw_pairs(p: usize, k: usize, stream: &RngStream) -> Result<Self> {
        if k % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "pair support needs an even count, got k = {k}"
            )));
        }
        if k > p {
            return Err(Error::InvalidParameter(format!("k = {k} exceeds p = {p}")));
        }
        let mut rng = stream.rng();
        let idx: Vec<usize> = rand::seq::index::sample(&mut rng, p, k).into_vec();
        let half = k / 2;
        Ok(Support::Pairs { left: idx[..half].to_vec(), right: idx[half..].to_vec() })
    }

    /// Total number of supporting (nonnull) indices.
    pub fn len(&self) -> usize {
        match self {
            Support::Plain(v) => v.len(),
            Support::Pairs { left, right } => left.len() + right.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All supporting indices, ascending.
    pub fn indices(&self) -> Vec<usize> {
        let mut v = match self {
            Support::Plain(v) => v.clone(),
            Support::Pairs { left, right } => {
                left.iter().chain(right).copied().collect()
            }
        };
        v.sort_unstable();
        v
    }

    fn validate(&self, p: usize) -> Result<()> {
        let idx = self.indices();
        if let Some(&bad) = idx.iter().find(|&&j| j >= p) {
            return Err(Error::InvalidParameter(format!(
                "support index {bad} out of range for p = {p}"
            )));
        }
        if idx.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("support indices must be distinct".into()));
        }
        if let Support::Pairs { left, right } = self {
            if left.len() != right.len() {
                return Err(Error::InvalidParameter(
                    "pair support sides must have equal length".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Full description of a response generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseSpec {
    pub kind: ResponseKind,
    /// Signal amplitude `A`; coefficients are `A/√n`.
    pub amplitude: f64,
    pub support: Support,
    /// Subtracted from covariates inside the logistic link.
    pub centering: f64,
    /// Indicator threshold for the pair-interaction setting.
    pub pair_threshold: f64,
    pub binary_transform: BinaryTransform,
}

impl ResponseSpec {
    /// Conventions for continuous (centered Gaussian) covariates: no link
    /// centering, pair threshold 0, sign transform.
    pub fn gaussian_family(kind: ResponseKind, amplitude: f64, support: Support) -> Self {
        Self {
            kind,
            amplitude,
            support,
            centering: 0.0,
            pair_threshold: 0.0,
            binary_transform: BinaryTransform::Sign,
        }
    }

    /// Conventions for discrete `{1,2,3}` covariates: link centering 2,
    /// pair threshold 1.5, transform `1{x > 1.5} − 2/3`.
    pub fn discrete_family(kind: ResponseKind, amplitude: f64, support: Support) -> Self {
        Self {
            kind,
            amplitude,
            support,
            centering: 2.0,
            pair_threshold: 1.5,
            binary_transform: BinaryTransform::ShiftedIndicator {
                threshold: 1.5,
                offset: 2.0 / 3.0,
            },
        }
    }

    /// Draw the right support shape for `kind` (pairs for the interaction
    /// setting, a flat set otherwise).
    pub fn draw_support(
        kind: ResponseKind,
        p: usize,
        k: usize,
        stream: &RngStream,
    ) -> Result<Support> {
        match kind {
            ResponseKind::NonlinearPairs => Support::draw_pairs(p, k, stream),
            _ => Support::draw_plain(p, k, stream),
        }
    }
}

/// Which variables the response actually depends on.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    nonnull: Vec<usize>,
    p: usize,
}

impl GroundTruth {
    pub fn new(nonnull: Vec<usize>, p: usize) -> Self {
        let mut nonnull = nonnull;
        nonnull.sort_unstable();
        Self { nonnull, p }
    }

    /// Nonnull indices, ascending.
    pub fn nonnull_set(&self) -> &[usize] {
        &self.nonnull
    }

    /// Complement of the nonnull set in `0..p`, ascending.
    pub fn null_set(&self) -> Vec<usize> {
        let mut mask = vec![true; self.p];
        for &j in &self.nonnull {
            mask[j] = false;
        }
        (0..self.p).filter(|&j| mask[j]).collect()
    }

    pub fn is_nonnull(&self, j: usize) -> bool {
        self.nonnull.binary_search(&j).is_ok()
    }

    pub fn p(&self) -> usize {
        self.p
    }
}

/// Generate a response vector for `x` under `spec`.
///
/// The stream governs only the response noise (Gaussian errors or Bernoulli
/// uniforms); exactly `n` draws are consumed regardless of amplitude, so runs
/// differing only in amplitude share their noise when given the same stream.
pub fn generate_response(
    x: &DMatrix<f64>,
    spec: &ResponseSpec,
    stream: &RngStream,
) -> Result<(DVector<f64>, GroundTruth)> {
    if spec.amplitude < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "amplitude must be nonnegative, got {}",
            spec.amplitude
        )));
    }
    spec.support.validate(x.ncols())?;
    let n = x.nrows();
    let coef = spec.amplitude / (n as f64).sqrt();
    let mut rng = stream.rng();
    let truth = GroundTruth::new(spec.support.indices(), x.ncols());

    let y = match (spec.kind, &spec.support) {
        (ResponseKind::Linear, Support::Plain(supp)) => DVector::from_fn(n, |i, _| {
            let eta: f64 = supp.iter().map(|&j| coef * x[(i, j)]).sum();
            eta + rng.sample::<f64, _>(StandardNormal)
        }),
        (ResponseKind::Logistic, Support::Plain(supp)) => DVector::from_fn(n, |i, _| {
            let eta: f64 = supp.iter().map(|&j| coef * (x[(i, j)] - spec.centering)).sum();
            f64::from(rng.random::<f64>() < sigmoid(eta))
        }),
        (ResponseKind::NonlinearPairs, Support::Pairs { left, right }) => {
            DVector::from_fn(n, |i, _| {
                let t = spec.pair_threshold;
                let active: f64 = left
                    .iter()
                    .zip(right)
                    .map(|(&a, &b)| f64::from(x[(i, a)] > t && x[(i, b)] > t))
                    .sum();
                coef * active + rng.sample::<f64, _>(StandardNormal)
            })
        }
        (ResponseKind::NonlinearBinary, Support::Plain(supp)) => DVector::from_fn(n, |i, _| {
            let eta: f64 =
                supp.iter().map(|&j| coef * spec.binary_transform.apply(x[(i, j)])).sum();
            f64::from(rng.random::<f64>() < sigmoid(eta))
        }),
        (kind, _) => {
            return Err(Error::InvalidParameter(format!(
                "support shape does not match response kind {kind:?}"
            )))
        }
    };
    Ok((y, truth))
}

fn sigmoid(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariates::GaussianModel;

    fn ar_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        GaussianModel::ar1(p, 0.5).unwrap().sample_rows(n, &RngStream::root(seed))
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let mut num = 0.0;
        let mut va = 0.0;
        let mut vb = 0.0;
        for i in 0..a.len() {
            num += (a[i] - ma) * (b[i] - mb);
            va += (a[i] - ma).powi(2);
            vb += (b[i] - mb).powi(2);
        }
        num / (va.sqrt() * vb.sqrt())
    }

    #[test]
    fn zero_amplitude_linear_response_is_independent_noise() {
        let n = 2000;
        let x = ar_matrix(n, 3, 61);
        let support = Support::draw_plain(3, 2, &RngStream::root(62)).unwrap();
        let spec = ResponseSpec::gaussian_family(ResponseKind::Linear, 0.0, support);
        let (y, truth) = generate_response(&x, &spec, &RngStream::root(63)).unwrap();
        assert_eq!(truth.nonnull_set().len(), 2);
        let yv: Vec<f64> = y.iter().copied().collect();
        for j in 0..3 {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            let r = corr(&yv, &col);
            assert!(r.abs() < 3.0 / (n as f64).sqrt(), "col {j}: corr {r}");
        }
        let mean = yv.iter().sum::<f64>() / n as f64;
        let var = yv.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.07);
        assert!((var - 1.0).abs() < 0.1);
    }

    #[test]
    fn zero_amplitude_logistic_is_fair_bernoulli() {
        let n = 10_000;
        let x = ar_matrix(n, 3, 64);
        let support = Support::draw_plain(3, 1, &RngStream::root(65)).unwrap();
        let spec = ResponseSpec::gaussian_family(ResponseKind::Logistic, 0.0, support);
        let (y, _) = generate_response(&x, &spec, &RngStream::root(66)).unwrap();
        assert!(y.iter().all(|&v| v == 0.0 || v == 1.0));
        let freq = y.sum() / n as f64;
        assert!((freq - 0.5).abs() < 3.0 * 0.005, "freq = {freq}");
    }

    #[test]
    fn forced_pair_indicators_shift_response_by_pair_count() {
        // With coefficient A/√n = 1, rows where every pair indicator fires
        // exceed rows where none fires by exactly k/2 = 10: generating both
        // from the same stream reuses the same noise, so subtraction is exact.
        let n = 50;
        let p = 25;
        let amplitude = (n as f64).sqrt(); // makes the coefficient exactly 1
        let support = Support::draw_pairs(p, 20, &RngStream::root(67)).unwrap();
        let spec = ResponseSpec::gaussian_family(
            ResponseKind::NonlinearPairs,
            amplitude,
            support,
        );
        let base = ar_matrix(n, p, 68);
        let all_on = base.map(|v| v.abs() + 0.1);
        let all_off = base.map(|v| -v.abs() - 0.1);
        let noise_stream = RngStream::root(69);
        let (y_on, truth) = generate_response(&all_on, &spec, &noise_stream).unwrap();
        let (y_off, _) = generate_response(&all_off, &spec, &noise_stream).unwrap();
        assert_eq!(truth.nonnull_set().len(), 20);
        for i in 0..n {
            assert!(
                (y_on[i] - y_off[i] - 10.0).abs() < 1e-12,
                "row {i}: {} vs {}",
                y_on[i],
                y_off[i]
            );
        }
    }

    #[test]
    fn pair_support_is_disjoint_and_halved() {
        let support = Support::draw_pairs(100, 20, &RngStream::root(70)).unwrap();
        match &support {
            Support::Pairs { left, right } => {
                assert_eq!(left.len(), 10);
                assert_eq!(right.len(), 10);
                let mut all: Vec<usize> = left.iter().chain(right).copied().collect();
                all.sort_unstable();
                all.dedup();
                assert_eq!(all.len(), 20, "pair indices must be distinct");
            }
            _ => panic!("expected pairs"),
        }
        assert!(Support::draw_pairs(100, 15, &RngStream::root(71)).is_err());
    }

    #[test]
    fn ground_truth_counts_match_k_for_every_kind() {
        let p = 40;
        let k = 8;
        let x = ar_matrix(30, p, 72);
        for kind in [
            ResponseKind::Linear,
            ResponseKind::Logistic,
            ResponseKind::NonlinearPairs,
            ResponseKind::NonlinearBinary,
        ] {
            let support = ResponseSpec::draw_support(kind, p, k, &RngStream::root(73)).unwrap();
            let spec = ResponseSpec::gaussian_family(kind, 1.0, support);
            let (_, truth) = generate_response(&x, &spec, &RngStream::root(74)).unwrap();
            assert_eq!(truth.nonnull_set().len(), k, "{kind:?}");
            assert_eq!(truth.null_set().len(), p - k);
            for &j in truth.nonnull_set() {
                assert!(truth.is_nonnull(j));
            }
        }
    }

    #[test]
    fn support_draw_is_stream_deterministic() {
        let a = Support::draw_plain(50, 5, &RngStream::root(75)).unwrap();
        let b = Support::draw_plain(50, 5, &RngStream::root(75)).unwrap();
        assert_eq!(a, b);
        let x = ar_matrix(20, 50, 76);
        let spec = ResponseSpec::gaussian_family(ResponseKind::Linear, 2.0, a);
        let (y1, _) = generate_response(&x, &spec, &RngStream::root(77)).unwrap();
        let (y2, _) = generate_response(&x, &spec, &RngStream::root(77)).unwrap();
        assert_eq!(y1, y2);
    }

    #[test]
    fn discrete_binary_transform_values() {
        let t = BinaryTransform::ShiftedIndicator { threshold: 1.5, offset: 2.0 / 3.0 };
        assert!((t.apply(1.0) + 2.0 / 3.0).abs() < 1e-15);
        assert!((t.apply(2.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((t.apply(3.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(BinaryTransform::Sign.apply(-0.3), -1.0);
        assert_eq!(BinaryTransform::Sign.apply(0.7), 1.0);
    }

    #[test]
    fn mismatched_support_shape_errors() {
        let x = ar_matrix(20, 10, 78);
        let pairs = Support::draw_pairs(10, 4, &RngStream::root(79)).unwrap();
        let spec = ResponseSpec::gaussian_family(ResponseKind::Linear, 1.0, pairs);
        assert!(generate_response(&x, &spec, &RngStream::root(80)).is_err());
        let plain = Support::Plain(vec![3, 11]);
        let spec = ResponseSpec::gaussian_family(ResponseKind::Linear, 1.0, plain);
        assert!(generate_response(&x, &spec, &RngStream::root(81)).is_err());
    }
}
