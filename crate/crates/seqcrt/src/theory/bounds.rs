//! Closed-form FDR guarantees for the sequential filter under three
//! dependence regimes of the null p-values: almost independent, exchangeable
//! (optionally with a correlation budget), and arbitrary with a fixed
//! ordering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dependence regime a bound applies to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    AlmostIndependent,
    ExchangeableSimple,
    ExchangeableCorrelated,
    Arbitrary,
}

/// A fully evaluated FDR bound together with the inputs that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub bound_value: f64,
    pub c: f64,
    pub q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_positions: Option<Vec<usize>>,
    /// Looser ordering-free cap `(q + c(1-q)) ln p`, reported alongside the
    /// position-sum bound for the arbitrary-dependence regime.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_cap: Option<f64>,
}

fn check_unit_open(name: &str, value: f64) -> Result<()> {
    if !(value > 0.0 && value < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "{name} must lie in (0, 1), got {value}"
        )));
    }
    Ok(())
}

/// FDR bound when every null p-value stays near level `c` conditionally on
/// the below-threshold indicators of the others: if the conditional level is
/// at most `c + delta` except on an event of probability `epsilon`, the FDR
/// is at most `q (c+delta)/c · (1-c)/(1-c-delta) + epsilon`.
pub fn bound_almost_independent(c: f64, q: f64, delta: f64, epsilon: f64) -> Result<BoundReport> {
    check_unit_open("c", c)?;
    check_unit_open("q", q)?;
    if delta < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "delta must be nonnegative, got {delta}"
        )));
    }
    if c + delta >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "c + delta must stay below 1, got {}",
            c + delta
        )));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in [0, 1], got {epsilon}"
        )));
    }
    let bound_value = q * (c + delta) / c * (1.0 - c) / (1.0 - c - delta) + epsilon;
    Ok(BoundReport {
        kind: BoundKind::AlmostIndependent,
        bound_value,
        c,
        q,
        delta: Some(delta),
        epsilon: Some(epsilon),
        rho: None,
        null_positions: None,
        log_cap: None,
    })
}

/// FDR inflation over the nominal level `q` for exchangeable null p-values
/// whose below-threshold indicators have pairwise correlation at most `rho`.
/// Capped at `c(1-q)`, the inflation of the correlation-free exchangeable
/// bound.
pub fn epsilon_inflation(c: f64, q: f64, rho: f64) -> Result<f64> {
    check_unit_open("c", c)?;
    check_unit_open("q", q)?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!(
            "rho must lie in [0, 1], got {rho}"
        )));
    }
    let delta = rho * (c * (1.0 - q) + q) / (c * (1.0 - q));
    let beta = (c + (1.0 - c) * q) / ((1.0 - c) * (1.0 - q));
    let shifted = c - c * delta;
    let bracket = c / (1.0 - c) - q * shifted / (1.0 - shifted);
    let candidate = delta / (1.0 + beta * delta) * bracket;
    Ok(candidate.min(c * (1.0 - q)))
}

/// FDR bound for exchangeable null p-values: `q + c(1-q)` outright, or the
/// tighter `q + epsilon_inflation(c, q, rho)` when a correlation budget for
/// the below-threshold indicators is available.
pub fn bound_exchangeable(c: f64, q: f64, rho: Option<f64>) -> Result<BoundReport> {
    check_unit_open("c", c)?;
    check_unit_open("q", q)?;
    match rho {
        None => Ok(BoundReport {
            kind: BoundKind::ExchangeableSimple,
            bound_value: q + c * (1.0 - q),
            c,
            q,
            delta: None,
            epsilon: None,
            rho: None,
            null_positions: None,
            log_cap: None,
        }),
        Some(rho) => {
            let epsilon = epsilon_inflation(c, q, rho)?;
            Ok(BoundReport {
                kind: BoundKind::ExchangeableCorrelated,
                bound_value: q + epsilon,
                c,
                q,
                delta: None,
                epsilon: Some(epsilon),
                rho: Some(rho),
                null_positions: None,
                log_cap: None,
            })
        }
    }
}

/// FDR bound with no dependence assumption, for a fixed ordering: the bound
/// sums `1/(j+1)` over the 1-based positions `j` of the nulls in the
/// ordering, scaled by `q + c(1-q)`; `log_cap` carries the cruder
/// `(q + c(1-q)) ln p`. Requires `(1-c)q < c`.
pub fn bound_arbitrary(c: f64, q: f64, null_positions: &[usize], p: usize) -> Result<BoundReport> {
    check_unit_open("c", c)?;
    check_unit_open("q", q)?;
    if (1.0 - c) * q >= c {
        return Err(Error::InvalidParameter(format!(
            "requires (1-c)q < c, got (1-c)q = {} with c = {c}",
            (1.0 - c) * q
        )));
    }
    if p == 0 {
        return Err(Error::InvalidParameter("p must be positive".into()));
    }
    let mut seen = vec![false; p + 1];
    for &j in null_positions {
        if j < 1 || j > p {
            return Err(Error::InvalidParameter(format!(
                "null position {j} outside 1..={p}"
            )));
        }
        if seen[j] {
            return Err(Error::InvalidParameter(format!(
                "null position {j} listed twice"
            )));
        }
        seen[j] = true;
    }
    let scale = q + c * (1.0 - q);
    let position_sum: f64 = null_positions.iter().map(|&j| 1.0 / (j + 1) as f64).sum();
    Ok(BoundReport {
        kind: BoundKind::Arbitrary,
        bound_value: scale * position_sum,
        c,
        q,
        delta: None,
        epsilon: None,
        rho: None,
        null_positions: Some(null_positions.to_vec()),
        log_cap: Some(scale * (p as f64).ln()),
    })
}

/// One grid point of the inflation surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonCell {
    pub c: f64,
    pub q: f64,
    pub rho: f64,
    pub epsilon: f64,
}

/// Tabulate `epsilon_inflation` over a `(q, rho)` grid at fixed `c`,
/// row-major in `q` then `rho` — ready for CSV emission and plotting.
pub fn epsilon_surface(c: f64, q_grid: &[f64], rho_grid: &[f64]) -> Result<Vec<EpsilonCell>> {
    let mut cells = Vec::with_capacity(q_grid.len() * rho_grid.len());
    for &q in q_grid {
        for &rho in rho_grid {
            cells.push(EpsilonCell {
                c,
                q,
                rho,
                epsilon: epsilon_inflation(c, q, rho)?,
            });
        }
    }
    Ok(cells)
}
