//! Worst-case expectation of the odds transform `x / (1 - x)` over
//! distributions with a fixed mean and variance, supported below a ceiling.
//! This extremal value is the engine behind the correlation-aware
//! exchangeable FDR bound; its maximizer is a two-point distribution with
//! one atom at the ceiling, which also powers the matching worst-case
//! p-value generator.

use crate::error::{Error, Result};

/// Largest possible value of `E[X / (1 - X)]` over random variables `X ≤
/// alpha` with `E[X] = mean` and `Var[X] = variance`. Requires
/// `0 < mean < alpha < 1` and a nonnegative variance.
///
/// The maximum is attained by a two-point distribution with one atom at
/// `alpha` and the other at `mean - variance / (alpha - mean)`, giving the
/// closed form evaluated here.
pub fn max_expected_odds(alpha: f64, mean: f64, variance: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if !(mean > 0.0 && mean < alpha) {
        return Err(Error::InvalidParameter(format!(
            "mean must lie in (0, alpha), got {mean} with alpha {alpha}"
        )));
    }
    if variance < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "variance must be nonnegative, got {variance}"
        )));
    }
    let gap = alpha - mean;
    Ok(alpha / (1.0 - alpha)
        - gap * gap / ((1.0 - alpha) * (variance + (1.0 - mean) * gap)))
}
