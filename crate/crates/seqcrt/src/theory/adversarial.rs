//! Worst-case p-value generators that drive the sequential filter's FDR to
//! its theoretical bounds, certifying that the bounds are sharp rather than
//! loose artifacts of the proofs.
//!
//! Both samplers emit coordinatewise-valid null p-values (stochastically no
//! smaller than uniform) whose joint dependence is engineered so the filter
//! either rejects en masse or not at all.

use rand::seq::index::sample as sample_indices;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::theory::bounds::epsilon_inflation;

/// Global-null generator: with probability `low_prob` a random batch of
/// `low_count` coordinates drops below the filter threshold `c` and the
/// filter rejects everything (false discovery proportion 1); otherwise all
/// p-values land above `c` and nothing is rejected. Each coordinate is
/// marginally uniform, yet the FDR equals `low_prob`, which approaches the
/// exchangeable bound `q + c(1-q)` as the dimension grows.
#[derive(Clone, Debug)]
pub struct GlobalNullSharp {
    p: usize,
    c: f64,
    low_count: usize,
    low_prob: f64,
}

impl GlobalNullSharp {
    pub fn new(p: usize, c: f64, q: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) || !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "c and q must lie in (0, 1), got c = {c}, q = {q}"
            )));
        }
        if p == 0 {
            return Err(Error::InvalidParameter("p must be positive".into()));
        }
        let cp = c * p as f64;
        let low_count = 1 + (cp / (q + c * (1.0 - q))).ceil() as usize;
        if low_count > p {
            return Err(Error::Infeasible(format!(
                "needs {low_count} below-threshold coordinates but only {p} are available; \
                 increase p or lower c"
            )));
        }
        Ok(Self {
            p,
            c,
            low_count,
            low_prob: cp / low_count as f64,
        })
    }

    /// Number of coordinates pushed below the threshold on the rejection
    /// branch.
    pub fn low_count(&self) -> usize {
        self.low_count
    }

    /// Probability of the rejection branch; also the exact FDR of the
    /// filter on this input.
    pub fn low_prob(&self) -> f64 {
        self.low_prob
    }

    /// Draw one p-value vector.
    pub fn sample(&self, stream: &RngStream) -> Vec<f64> {
        let mut rng = stream.rng();
        let mut pvals: Vec<f64> = (0..self.p)
            .map(|_| rng.random_range(self.c..1.0))
            .collect();
        if rng.random_range(0.0..1.0) < self.low_prob {
            for idx in sample_indices(&mut rng, self.p, self.low_count) {
                pvals[idx] = rng.random_range(0.0..self.c);
            }
        }
        pvals
    }
}

/// Exchangeable generator with a correlation budget: the first
/// `nonnull_count` coordinates are nonnulls with p-value 0; the null block
/// mixes two batch sizes of below-threshold coordinates so that the
/// indicator correlation stays at most `rho` while the filter's FDR
/// approaches `q + epsilon_inflation(c, q, rho)` as the dimension grows.
#[derive(Clone, Debug)]
pub struct ExchangeableSharp {
    p: usize,
    c: f64,
    nonnull_count: usize,
    low_atom: f64,
    high_atom: f64,
    low_weight: f64,
    low_batch: usize,
    high_batch: usize,
    fdr_limit: f64,
}

impl ExchangeableSharp {
    pub fn new(p: usize, c: f64, q: f64, rho: f64) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) || !(q > 0.0 && q < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "c and q must lie in (0, 1), got c = {c}, q = {q}"
            )));
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidParameter(format!(
                "rho must lie in [0, 1], got {rho}"
            )));
        }
        let m = p as f64;
        let nonnull_count = m.sqrt().floor() as usize;
        if nonnull_count < 1 || p - nonnull_count < 4 {
            return Err(Error::InvalidParameter(format!(
                "p = {p} is too small for the construction"
            )));
        }
        let n_nulls = p - nonnull_count;

        // Indicator variance budget for the null block, slightly above
        // rho * c(1-c) at finite size.
        let rho_adjusted = ((m - 1.0) * rho + 1.0) / m;
        let sigma2 = rho_adjusted * c * (1.0 - c);
        let alpha = c / (c + q - c * q);
        let low_atom = c - sigma2 / (alpha - c);
        let rho_max = c * (1.0 - q) / (q + c * (1.0 - q));
        if low_atom < 0.0 {
            return Err(Error::Infeasible(format!(
                "correlation budget too large at this size: the below-threshold \
                 fraction {low_atom:.6} is negative; requires rho below about {rho_max:.6}"
            )));
        }
        let low_weight = (alpha - c).powi(2) / ((alpha - c).powi(2) + sigma2);
        let low_batch = (n_nulls as f64 * low_atom).floor() as usize + 1;
        let high_batch = ((n_nulls as f64 * alpha).floor() as usize).saturating_sub(2);
        if low_batch > high_batch || high_batch > n_nulls {
            return Err(Error::Infeasible(format!(
                "degenerate batch sizes {low_batch} and {high_batch} for {n_nulls} nulls"
            )));
        }
        Ok(Self {
            p,
            c,
            nonnull_count,
            low_atom,
            high_atom: alpha,
            low_weight,
            low_batch,
            high_batch,
            fdr_limit: q + epsilon_inflation(c, q, rho)?,
        })
    }

    pub fn nonnull_count(&self) -> usize {
        self.nonnull_count
    }

    /// Fraction of nulls below the threshold on the small-batch branch.
    pub fn low_atom(&self) -> f64 {
        self.low_atom
    }

    /// Fraction of nulls below the threshold on the large-batch branch.
    pub fn high_atom(&self) -> f64 {
        self.high_atom
    }

    /// Mixture weight of the small-batch branch.
    pub fn low_weight(&self) -> f64 {
        self.low_weight
    }

    pub fn low_batch(&self) -> usize {
        self.low_batch
    }

    pub fn high_batch(&self) -> usize {
        self.high_batch
    }

    /// The FDR this generator approaches as `p` grows: the refined
    /// exchangeable bound.
    pub fn fdr_limit(&self) -> f64 {
        self.fdr_limit
    }

    /// Draw one p-value vector: nonnulls first (exact zeros), then the
    /// exchangeable null block.
    pub fn sample(&self, stream: &RngStream) -> Vec<f64> {
        let mut rng = stream.rng();
        let n_nulls = self.p - self.nonnull_count;
        let batch = if rng.random_range(0.0..1.0) < self.low_weight {
            self.low_batch
        } else {
            self.high_batch
        };
        let mut pvals = vec![0.0; self.p];
        for v in &mut pvals[self.nonnull_count..] {
            *v = rng.random_range(self.c..1.0);
        }
        for idx in sample_indices(&mut rng, n_nulls, batch) {
            pvals[self.nonnull_count + idx] = rng.random_range(0.0..self.c);
        }
        pvals
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SeqStepParams;
    use crate::selection::{seqstep_select, Ordering};

    #[test]
    fn batch_size_matches_hand_computation_across_dimensions() {
        assert_eq!(GlobalNullSharp::new(100, 0.1, 0.1).unwrap().low_count(), 54);
        assert_eq!(GlobalNullSharp::new(1000, 0.1, 0.1).unwrap().low_count(), 528);
        assert_eq!(GlobalNullSharp::new(10_000, 0.1, 0.1).unwrap().low_count(), 5265);
    }

    #[test]
    fn infeasible_when_the_batch_exceeds_the_dimension() {
        let err = GlobalNullSharp::new(100, 0.9, 0.01).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)), "{err}");
    }

    #[test]
    fn coordinates_are_marginally_uniform() {
        let gen = GlobalNullSharp::new(20, 0.1, 0.1).unwrap();
        let master = RngStream::root(510);
        let draws = 100_000;
        let mut values: Vec<f64> = (0..draws)
            .map(|i| gen.sample(&master.child(i))[0])
            .collect();
        values.sort_by(f64::total_cmp);
        let mut ks: f64 = 0.0;
        for (i, v) in values.iter().enumerate() {
            let ecdf_hi = (i + 1) as f64 / draws as f64;
            let ecdf_lo = i as f64 / draws as f64;
            ks = ks.max((ecdf_hi - v).abs()).max((v - ecdf_lo).abs());
        }
        // 1% critical value of the Kolmogorov-Smirnov statistic.
        let critical = 1.63 / (draws as f64).sqrt();
        assert!(ks < critical, "KS statistic {ks} vs critical {critical}");
    }

    #[test]
    fn filter_rejects_all_or_nothing_and_fdr_meets_the_prediction() {
        let c = 0.1;
        let q = 0.1;
        let params = SeqStepParams::new(c, q).unwrap();
        let master = RngStream::root(511);
        let mut estimates = Vec::new();
        let mut exact = Vec::new();
        for (label, p) in [(0u64, 100usize), (1, 1000), (2, 10_000)] {
            let gen = GlobalNullSharp::new(p, c, q).unwrap();
            let order = Ordering::identity(p);
            let reps = 5000;
            let mut fdp_sum = 0.0;
            for rep in 0..reps {
                let pvals = gen.sample(&master.child(label).child(rep));
                let any_low = pvals.iter().any(|&v| v <= c);
                let sel = seqstep_select(&pvals, &order, &params).unwrap();
                if any_low {
                    assert_eq!(sel.k_hat, p, "rejection branch must clear the whole list");
                    assert_eq!(sel.selected.len(), gen.low_count());
                    fdp_sum += 1.0;
                } else {
                    assert_eq!(sel.k_hat, 0);
                }
            }
            let estimate = fdp_sum / reps as f64;
            assert!(
                (estimate - gen.low_prob()).abs() < 0.017,
                "p = {p}: estimate {estimate} vs exact {}",
                gen.low_prob()
            );
            estimates.push(estimate);
            exact.push(gen.low_prob());
        }
        // The exact FDR climbs toward q + c(1-q) = 0.19 with the dimension;
        // the estimates track it within Monte Carlo noise.
        assert!(exact[0] < exact[1] && exact[1] < exact[2] && exact[2] < 0.19);
        assert!(estimates[1] > estimates[0] - 0.017);
        assert!(estimates[2] > estimates[1] - 0.017);
        assert!(estimates[2] < 0.19 + 0.017);
    }

    #[test]
    fn exchangeable_plan_matches_hand_computation() {
        let gen = ExchangeableSharp::new(10_000, 0.1, 0.1, 0.05).unwrap();
        assert_eq!(gen.nonnull_count(), 100);
        assert!((gen.high_atom() - 0.526316).abs() < 1e-6);
        assert!((gen.low_atom() - 0.089424).abs() < 1e-6);
        assert_eq!(gen.low_batch(), 886);
        assert_eq!(gen.high_batch(), 5208);
        assert!((gen.low_weight() - 0.975793).abs() < 1e-6);
        assert!((gen.fdr_limit() - 0.110433).abs() < 5e-6);
    }

    #[test]
    fn null_indicator_correlation_respects_the_budget() {
        let c = 0.1;
        let rho = 0.2;
        let gen = ExchangeableSharp::new(400, c, 0.1, rho).unwrap();
        let master = RngStream::root(512);
        let reps = 4000;
        let (mut s1, mut s2, mut s12) = (0.0, 0.0, 0.0);
        let j1 = gen.nonnull_count();
        let j2 = gen.nonnull_count() + 1;
        for rep in 0..reps {
            let pvals = gen.sample(&master.child(rep));
            let a = (pvals[j1] <= c) as u32 as f64;
            let b = (pvals[j2] <= c) as u32 as f64;
            s1 += a;
            s2 += b;
            s12 += a * b;
        }
        let n = reps as f64;
        let (m1, m2) = (s1 / n, s2 / n);
        let cov = s12 / n - m1 * m2;
        let corr = cov / (m1 * (1.0 - m1) * m2 * (1.0 - m2)).sqrt();
        assert!(corr <= rho + 0.06, "correlation {corr} vs budget {rho}");
        // Null p-values are stochastically no smaller than uniform.
        assert!(m1 <= c + 3.0 * (c * (1.0 - c) / n).sqrt() + 0.01);
    }

    #[test]
    fn exchangeable_fdr_approaches_the_refined_bound() {
        let c = 0.1;
        let q = 0.1;
        let gen = ExchangeableSharp::new(10_000, c, q, 0.05).unwrap();
        let params = SeqStepParams::new(c, q).unwrap();
        let order = Ordering::identity(10_000);
        let master = RngStream::root(513);
        let reps = 2000;
        let mut fdp_sum = 0.0;
        for rep in 0..reps {
            let pvals = gen.sample(&master.child(rep));
            let sel = seqstep_select(&pvals, &order, &params).unwrap();
            let false_hits = sel
                .selected
                .iter()
                .filter(|&&j| j >= gen.nonnull_count())
                .count();
            fdp_sum += false_hits as f64 / sel.selected.len().max(1) as f64;
        }
        let fdr = fdp_sum / reps as f64;
        assert!(
            fdr >= gen.fdr_limit() - 0.02,
            "FDR {fdr} too far below the limit {}",
            gen.fdr_limit()
        );
        assert!(fdr <= gen.fdr_limit() + 0.01, "FDR {fdr} above the limit");
    }

    #[test]
    fn correlation_budget_boundary_drives_the_low_atom_to_zero() {
        let c = 0.1;
        let q = 0.1;
        let rho_max = c * (1.0 - q) / (q + c * (1.0 - q));
        let p = 1_000_000;
        let inside = ExchangeableSharp::new(p, c, q, rho_max * (1.0 - 1e-5)).unwrap();
        assert!(inside.low_atom() > 0.0 && inside.low_atom() < 1e-3);
        // At the exact boundary the finite-size adjustment tips the atom
        // negative, and beyond it the construction is infeasible.
        assert!(matches!(
            ExchangeableSharp::new(p, c, q, rho_max),
            Err(Error::Infeasible(_))
        ));
        assert!(ExchangeableSharp::new(p, c, q, (rho_max + 0.05).min(1.0)).is_err());
    }
}
