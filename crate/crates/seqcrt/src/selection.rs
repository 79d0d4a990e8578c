//! Ordered sequential selection with false-discovery-rate control.
//!
//! Given one p-value per variable and an ordering that puts promising
//! variables first, the filter walks down the ordering and keeps track of the
//! ratio `(1 + #{p > c}) / max(#{p ≤ c}, 1)` over each prefix. The largest
//! prefix whose ratio stays within `(1 - c)/c · q` is accepted, and the
//! selected set is the below-threshold variables inside it. Only the
//! indicators `1{p ≤ c}` matter — the filter never looks at p-value
//! magnitudes — which is exactly what makes coarse, grid-valued
//! randomization p-values usable.
//!
//! Two end-to-end pipelines build the ordering:
//!
//! * [`pipeline_split`] — split the rows; one fold produces the p-values, the
//!   other fold alone produces ordering scores, making the ordering
//!   independent of the p-values.
//! * [`pipeline_symmetric`] — a single pass of the randomization test yields
//!   both the p-values and permutation-invariant scores; for null variables
//!   the score is independent of its own p-value, so the shared data does
//!   not bias the filter.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariates::CovariateModel;
use crate::crt::{crt_all_variables, CrtConfig};
use crate::data::{Dataset, PValueRecord, Selection, SeqStepParams};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats::{statistic_single, StatisticInput};

/// Child-stream labels of the split pipeline.
const CHILD_SHUFFLE: u64 = 0;
const CHILD_PVALUE_FOLD: u64 = 1;
const CHILD_ORDERING_FOLD: u64 = 2;

/// Relative slack for the ratio-threshold comparison, so a ratio that attains
/// the threshold exactly in real arithmetic is not rejected over the last
/// float bit of `(1-c)/c · q`.
const RATIO_SLACK: f64 = 1e-9;

/// A processing order over variables: `positions()[k]` is the variable placed
/// at rank `k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ordering {
    positions: Vec<usize>,
}

impl Ordering {
    /// Variables in their original index order.
    pub fn identity(p: usize) -> Self {
        Self { positions: (0..p).collect() }
    }

    /// An explicit order; must visit every variable exactly once.
    pub fn new(positions: Vec<usize>) -> Result<Self> {
        let p = positions.len();
        let mut seen = vec![false; p];
        for &j in &positions {
            if j >= p || seen[j] {
                return Err(Error::InvalidParameter(format!(
                    "ordering is not a permutation: index {j} repeated or out of range"
                )));
            }
            seen[j] = true;
        }
        Ok(Self { positions })
    }

    /// Highest score first; ties broken by ascending variable index, NaN
    /// scores placed last.
    pub fn from_scores_desc(scores: &[f64]) -> Self {
        let key = |s: f64| if s.is_nan() { f64::NEG_INFINITY } else { s };
        let mut positions: Vec<usize> = (0..scores.len()).collect();
        positions.sort_by(|&a, &b| {
            key(scores[b]).total_cmp(&key(scores[a])).then(a.cmp(&b))
        });
        Self { positions }
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Run the filter on plain p-values (each must lie in `[0, 1]`), comparing
/// `p ≤ c` directly.
pub fn seqstep_select(
    pvals: &[f64],
    order: &Ordering,
    params: &SeqStepParams,
) -> Result<Selection> {
    if order.len() != pvals.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} p-values but ordering of length {}",
            pvals.len(),
            order.len()
        )));
    }
    if let Some(bad) = pvals.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidParameter(format!(
            "p-values must lie in [0, 1], found {bad}"
        )));
    }
    let below: Vec<bool> =
        order.positions().iter().map(|&j| pvals[j] <= params.c()).collect();
    Ok(seqstep_core(&below, order.positions(), params))
}

/// Run the filter on grid-valued records, comparing ranks to the exact grid
/// threshold (robust to the float representation of `c`).
pub fn seqstep_select_records(
    records: &[PValueRecord],
    order: &Ordering,
    params: &SeqStepParams,
) -> Result<Selection> {
    let p = records.len();
    if order.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "{p} records but ordering of length {}",
            order.len()
        )));
    }
    let mut below_by_variable = vec![None; p];
    for record in records {
        if record.variable >= p {
            return Err(Error::InvalidParameter(format!(
                "record for variable {} out of range for {p} variables",
                record.variable
            )));
        }
        if below_by_variable[record.variable].is_some() {
            return Err(Error::InvalidParameter(format!(
                "duplicate record for variable {}",
                record.variable
            )));
        }
        below_by_variable[record.variable] = Some(record.at_most(params.c()));
    }
    let below: Vec<bool> = order
        .positions()
        .iter()
        .map(|&j| below_by_variable[j].expect("every variable covered"))
        .collect();
    Ok(seqstep_core(&below, order.positions(), params))
}

/// One left-to-right pass over the ordered below-threshold indicators.
fn seqstep_core(below_in_order: &[bool], original_at: &[usize], params: &SeqStepParams) -> Selection {
    let threshold = params.ratio_threshold();
    let slack = RATIO_SLACK * threshold.max(1.0);
    let mut above = 0usize;
    let mut below = 0usize;
    let mut k_hat = 0usize;
    let mut ratio_trace = Vec::with_capacity(below_in_order.len());
    for (k, &is_below) in below_in_order.iter().enumerate() {
        if is_below {
            below += 1;
        } else {
            above += 1;
        }
        let ratio = (1 + above) as f64 / below.max(1) as f64;
        ratio_trace.push(ratio);
        if ratio <= threshold + slack {
            k_hat = k + 1;
        }
    }
    let mut selected: Vec<usize> = below_in_order[..k_hat]
        .iter()
        .zip(original_at)
        .filter_map(|(&is_below, &j)| is_below.then_some(j))
        .collect();
    selected.sort_unstable();
    Selection { k_hat, selected, ratio_trace }
}

/// Split pipeline: p-values from one row fold, ordering scores from the
/// other.
///
/// Rows are shuffled by a child stream and the first `⌈split_frac · n⌉` go to
/// the p-value fold. Ordering scores are single-probe statistics of the
/// configured kind computed on the second fold only, so the ordering is
/// independent of the p-values by construction.
pub fn pipeline_split(
    dataset: &Dataset,
    model: &CovariateModel,
    cfg: &CrtConfig,
    params: &SeqStepParams,
    split_frac: f64,
    stream: &RngStream,
) -> Result<Selection> {
    if !(split_frac > 0.0 && split_frac < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split fraction must lie in (0, 1), got {split_frac}"
        )));
    }
    let n = dataset.n();
    let n_pval = (split_frac * n as f64).ceil() as usize;
    if n_pval < 2 || n - n_pval < 2 {
        return Err(Error::InvalidParameter(format!(
            "split of {n} rows at fraction {split_frac} leaves a fold with fewer than 2 rows"
        )));
    }
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut stream.child(CHILD_SHUFFLE).rng());
    let pval_fold = dataset.subset_rows(&rows[..n_pval])?;
    let order_fold = dataset.subset_rows(&rows[n_pval..])?;

    let records =
        crt_all_variables(&pval_fold, model, cfg, &stream.child(CHILD_PVALUE_FOLD))?;

    let ordering_stream = stream.child(CHILD_ORDERING_FOLD);
    let scores: Vec<f64> = (0..dataset.p())
        .into_par_iter()
        .map(|j| {
            let probe = order_fold.x().column(j).clone_owned();
            let x_rest = order_fold.x().clone().remove_column(j);
            let input = StatisticInput {
                variable: j,
                x_rest: &x_rest,
                y: order_fold.y(),
                response: order_fold.response_class(),
                cv_stream: ordering_stream.child(j as u64),
            };
            statistic_single(&cfg.statistic, &probe, &input)
                .map_err(|e| Error::Statistic { variable: j, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;

    seqstep_select_records(&records, &Ordering::from_scores_desc(&scores), params)
}

/// Single-pass pipeline: the randomization test supplies both the p-values
/// and the ordering scores; variables are ordered by score, highest first.
pub fn pipeline_symmetric(
    dataset: &Dataset,
    model: &CovariateModel,
    cfg: &CrtConfig,
    params: &SeqStepParams,
    stream: &RngStream,
) -> Result<Selection> {
    let records = crt_all_variables(dataset, model, cfg, stream)?;
    let mut scores = vec![f64::NAN; dataset.p()];
    for record in &records {
        scores[record.variable] = record.score;
    }
    seqstep_select_records(&records, &Ordering::from_scores_desc(&scores), params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariates::GaussianModel;
    use crate::crt::CrtMode;
    use crate::data::ResponseClass;
    use crate::stats::{ScoreKind, StatisticKind};
    use nalgebra::DVector;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;
    use std::collections::HashSet;

    fn params(c: f64, q: f64) -> SeqStepParams {
        SeqStepParams::new(c, q).unwrap()
    }

    #[test]
    fn hand_example_selects_below_threshold_prefix() {
        let pvals = [0.05, 0.05, 0.5, 0.05, 0.9];
        let sel =
            seqstep_select(&pvals, &Ordering::identity(5), &params(0.1, 0.5)).unwrap();
        assert_eq!(sel.k_hat, 5);
        assert_eq!(sel.selected, vec![0, 1, 3]);
        let expected_trace = [1.0, 0.5, 1.0, 2.0 / 3.0, 1.0];
        for (got, want) in sel.ratio_trace.iter().zip(expected_trace) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn all_large_pvalues_select_nothing() {
        let pvals = vec![1.0; 100];
        let sel =
            seqstep_select(&pvals, &Ordering::identity(100), &params(0.1, 0.1)).unwrap();
        assert_eq!(sel.k_hat, 0);
        assert!(sel.selected.is_empty());
        assert!(sel.ratio_trace.iter().all(|&r| r >= 2.0));
    }

    #[test]
    fn short_below_prefix_cannot_satisfy_a_tight_level() {
        // Eight tiny p-values followed by 92 at 1.0, with c = 0.5 and q = 0.1:
        // the best prefix ratio is 1/8 at k = 8, still above the threshold
        // (1-c)/c·q = 0.1, so nothing can be selected.
        let mut pvals = vec![0.01; 8];
        pvals.extend(std::iter::repeat(1.0).take(92));
        let sel =
            seqstep_select(&pvals, &Ordering::identity(100), &params(0.5, 0.1)).unwrap();
        assert_eq!(sel.k_hat, 0);
        assert!(sel.selected.is_empty());
        let min_ratio = sel.ratio_trace.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(min_ratio, 1.0 / 8.0);
        assert_eq!(sel.ratio_trace[7], 0.125);
    }

    #[test]
    fn ordering_is_applied_before_the_filter() {
        let pvals = [0.9, 0.01, 0.9, 0.01];
        let order = Ordering::new(vec![1, 3, 0, 2]).unwrap();
        let sel = seqstep_select(&pvals, &order, &params(0.1, 0.3)).unwrap();
        assert_eq!(sel.k_hat, 4);
        assert_eq!(sel.selected, vec![1, 3]);
    }

    #[test]
    fn exactly_attained_threshold_is_kept() {
        // c = 0.1, q = 0.5: threshold 4.5. One below-c p-value and four
        // above give ratio (1+4)/1 = 5 > 4.5; three above give 4/1 ≤ 4.5
        // only through the float slack if (1-c)/c·q rounds below 4.5.
        let pvals = [0.05, 0.5, 0.5, 0.5, 0.5];
        let sel =
            seqstep_select(&pvals, &Ordering::identity(5), &params(0.1, 0.5)).unwrap();
        // Ratios: 1, 2, 3, 4, 5 — prefixes up to k=4 pass at 4.5.
        assert_eq!(sel.k_hat, 4);
        assert_eq!(sel.selected, vec![0]);
    }

    #[test]
    fn grid_records_use_exact_rank_comparison() {
        let records: Vec<PValueRecord> = [1u32, 2, 1, 10, 1]
            .iter()
            .enumerate()
            .map(|(j, &rank)| PValueRecord {
                variable: j,
                rank,
                denominator: 10,
                score: (5 - j) as f64,
                stream_id: 0,
            })
            .collect();
        let order = Ordering::from_scores_desc(&[5.0, 4.0, 3.0, 2.0, 1.0]);
        assert_eq!(order.positions(), &[0, 1, 2, 3, 4]);
        // c = 0.1 over denominator 10: exactly rank 1 counts as below.
        let sel = seqstep_select_records(&records, &order, &params(0.1, 0.5)).unwrap();
        assert_eq!(sel.k_hat, 5);
        assert_eq!(sel.selected, vec![0, 2, 4]);
    }

    #[test]
    fn score_ordering_handles_ties_and_nans() {
        let scores = [1.0, f64::NAN, 3.0, 1.0, -2.0];
        let order = Ordering::from_scores_desc(&scores);
        assert_eq!(order.positions(), &[2, 0, 3, 4, 1]);
    }

    #[test]
    fn ordering_validation_rejects_non_permutations() {
        assert!(Ordering::new(vec![0, 1, 1]).is_err());
        assert!(Ordering::new(vec![0, 3]).is_err());
        assert!(Ordering::new(vec![2, 0, 1]).is_ok());
    }

    #[test]
    fn pipelines_run_and_validate_folds() {
        let model = CovariateModel::Gaussian(GaussianModel::ar1(4, 0.4).unwrap());
        let x = model.sample_rows(24, &RngStream::root(401));
        let mut rng = RngStream::root(402).rng();
        let y = DVector::from_fn(24, |i, _| {
            2.0 * x[(i, 1)] + rng.sample::<f64, _>(StandardNormal)
        });
        let dataset = Dataset::new(x, y, ResponseClass::Continuous).unwrap();
        let cfg = CrtConfig {
            b: 4,
            mode: CrtMode::OneShot,
            statistic: StatisticKind::AbsCorrelation,
            score: ScoreKind::MaxStat,
        };
        let sp = params(0.2, 0.3);

        let split =
            pipeline_split(&dataset, &model, &cfg, &sp, 0.5, &RngStream::root(403)).unwrap();
        assert!(split.selected.iter().all(|&j| j < 4));
        assert_eq!(split.ratio_trace.len(), 4);

        let symmetric =
            pipeline_symmetric(&dataset, &model, &cfg, &sp, &RngStream::root(404)).unwrap();
        assert!(symmetric.selected.iter().all(|&j| j < 4));

        // A 24-row dataset split at 0.95 leaves one ordering row.
        assert!(pipeline_split(&dataset, &model, &cfg, &sp, 0.95, &RngStream::root(405))
            .is_err());
        assert!(pipeline_split(&dataset, &model, &cfg, &sp, 1.5, &RngStream::root(406))
            .is_err());
    }

    #[test]
    fn symmetric_ordering_puts_signal_variables_first() {
        // Strong linear signal on variables 0 and 4: across replications
        // their mean position in the score ordering must come well before
        // the null variables'.
        let p = 8;
        let model = CovariateModel::Gaussian(
            GaussianModel::new(DVector::zeros(p), nalgebra::DMatrix::identity(p, p)).unwrap(),
        );
        let cfg = CrtConfig {
            b: 4,
            mode: CrtMode::OneShot,
            statistic: StatisticKind::AbsCorrelation,
            score: ScoreKind::MaxStat,
        };
        let master = RngStream::root(407);
        let reps = 100;
        let mut nonnull_positions = 0.0;
        let mut null_positions = 0.0;
        for rep in 0..reps {
            let rep_stream = master.child(rep);
            let x = model.sample_rows(60, &rep_stream.child(0));
            let mut rng = rep_stream.child(1).rng();
            let y = DVector::from_fn(60, |i, _| {
                3.0 * (x[(i, 0)] + x[(i, 4)]) + rng.sample::<f64, _>(StandardNormal)
            });
            let dataset = Dataset::new(x, y, ResponseClass::Continuous).unwrap();
            let records =
                crt_all_variables(&dataset, &model, &cfg, &rep_stream.child(2)).unwrap();
            let scores: Vec<f64> = {
                let mut s = vec![0.0; p];
                for r in &records {
                    s[r.variable] = r.score;
                }
                s
            };
            let order = Ordering::from_scores_desc(&scores);
            for (pos, &j) in order.positions().iter().enumerate() {
                if j == 0 || j == 4 {
                    nonnull_positions += pos as f64;
                } else {
                    null_positions += pos as f64;
                }
            }
        }
        let mean_nonnull = nonnull_positions / (2.0 * reps as f64);
        let mean_null = null_positions / (6.0 * reps as f64);
        assert!(
            mean_nonnull + 2.0 < mean_null,
            "nonnull mean position {mean_nonnull}, null {mean_null}"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn selection_grows_with_q(
            pvals in proptest::collection::vec(0.001f64..1.0, 1..40),
            c in 0.05f64..0.95,
            q1 in 0.01f64..0.9,
            dq in 0.0f64..0.4,
        ) {
            let q2 = (q1 + dq).min(0.95);
            let order = Ordering::identity(pvals.len());
            let small = seqstep_select(&pvals, &order, &params(c, q1)).unwrap();
            let large = seqstep_select(&pvals, &order, &params(c, q2)).unwrap();
            let small_set: HashSet<_> = small.selected.iter().collect();
            let large_set: HashSet<_> = large.selected.iter().collect();
            prop_assert!(small_set.is_subset(&large_set));
            prop_assert!(small.k_hat <= large.k_hat);
        }

        #[test]
        fn only_indicators_matter(
            pvals in proptest::collection::vec(0.001f64..1.0, 1..40),
            c in 0.05f64..0.95,
            q in 0.01f64..0.9,
        ) {
            let order = Ordering::identity(pvals.len());
            let sp = params(c, q);
            let raw = seqstep_select(&pvals, &order, &sp).unwrap();
            let flattened: Vec<f64> =
                pvals.iter().map(|&v| if v <= c { c } else { 1.0 }).collect();
            let coarse = seqstep_select(&flattened, &order, &sp).unwrap();
            prop_assert_eq!(raw, coarse);
        }

        #[test]
        fn accepted_prefix_is_maximal_and_contains_the_selection(
            pvals in proptest::collection::vec(0.001f64..1.0, 1..40),
            c in 0.05f64..0.95,
            q in 0.01f64..0.9,
            seed in 0u64..1000,
        ) {
            // Random ordering, then check the defining properties of k̂.
            let mut positions: Vec<usize> = (0..pvals.len()).collect();
            positions.shuffle(&mut RngStream::root(seed).rng());
            let order = Ordering::new(positions).unwrap();
            let sp = params(c, q);
            let sel = seqstep_select(&pvals, &order, &sp).unwrap();
            let threshold = sp.ratio_threshold() + RATIO_SLACK * sp.ratio_threshold().max(1.0);
            for (k, &ratio) in sel.ratio_trace.iter().enumerate() {
                if k + 1 > sel.k_hat {
                    prop_assert!(ratio > threshold);
                }
            }
            if sel.k_hat > 0 {
                prop_assert!(sel.ratio_trace[sel.k_hat - 1] <= threshold);
            }
            let prefix: HashSet<_> =
                order.positions()[..sel.k_hat].iter().collect();
            for j in &sel.selected {
                prop_assert!(prefix.contains(j));
                prop_assert!(pvals[*j] <= c);
            }
        }
    }
}
