//! Executable guarantees for the sequential filter: closed-form FDR bounds
//! under three dependence regimes, the correlation-inflation surface, the
//! extremal odds value behind the exchangeable analysis, worst-case p-value
//! generators that attain the bounds, and a Monte Carlo estimator of the
//! conditional levels that calibrate the almost-independent bound.

pub mod adversarial;
pub mod bounds;
pub mod conditional_level;
pub mod extremal;

pub use adversarial::{ExchangeableSharp, GlobalNullSharp};
pub use bounds::{
    bound_almost_independent, bound_arbitrary, bound_exchangeable, epsilon_inflation,
    epsilon_surface, BoundKind, BoundReport, EpsilonCell,
};
pub use conditional_level::{
    estimate_conditional_levels, ConditionalLevelConfig, ConditionalLevelReport,
};
pub use extremal::max_expected_odds;
