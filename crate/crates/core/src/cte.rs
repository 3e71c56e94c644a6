//! Cross-tail estimation: estimate each conditional sample set separately
//! and take the maximum, versus the pooled peaks-over-threshold baseline
//! that estimates once on the union. Also the sign/magnitude algebra that
//! carries tail verdicts through `|X|`, powers and moments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TailError};
use crate::estimators::{split_average, EstimatorConfig, TailEstimate};
use crate::rng::{Purpose, RngStream};

/// Samples from one conditional distribution (e.g. the test losses of one
/// trained model).
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalSamples {
    pub id: u64,
    pub samples: Vec<f64>,
}

impl ConditionalSamples {
    pub fn new(id: u64, samples: Vec<f64>) -> Self {
        Self { id, samples }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CteVerdict {
    Positive(f64),
    /// Every estimate was `<= 0`; carries the largest one.
    NonPositive(f64),
}

impl CteVerdict {
    fn from_max(max: f64) -> Self {
        if max > 0.0 {
            CteVerdict::Positive(max)
        } else {
            CteVerdict::NonPositive(max)
        }
    }

    /// The maximum estimate, whatever its sign.
    pub fn value(&self) -> f64 {
        match *self {
            CteVerdict::Positive(v) | CteVerdict::NonPositive(v) => v,
        }
    }

    pub fn is_positive(&self) -> bool {
        matches!(self, CteVerdict::Positive(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalEstimate {
    pub id: u64,
    /// `None` when every split of this conditional was degenerate.
    pub estimate: Option<f64>,
    pub degenerate_splits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CteResult {
    pub verdict: CteVerdict,
    pub per_conditional: Vec<ConditionalEstimate>,
}

impl CteResult {
    pub fn degenerate_splits(&self) -> usize {
        self.per_conditional
            .iter()
            .map(|c| c.degenerate_splits)
            .sum()
    }

    /// Conditionals excluded from the maximum.
    pub fn failed_conditionals(&self) -> usize {
        self.per_conditional
            .iter()
            .filter(|c| c.estimate.is_none())
            .count()
    }
}

/// Naive cross-tail estimation: one base estimate per conditional.
pub fn ncte(conditionals: &[ConditionalSamples], config: &EstimatorConfig) -> Result<CteResult> {
    // p = 1 never touches the split stream
    cte(conditionals, 1, config, &RngStream::root(0))
}

/// Cross-tail estimation with `p` random splits per conditional.
///
/// Split streams are keyed by conditional id, so the verdict does not depend
/// on the order of `conditionals` or on the thread count.
pub fn cte(
    conditionals: &[ConditionalSamples],
    p: usize,
    config: &EstimatorConfig,
    rng: &RngStream,
) -> Result<CteResult> {
    if conditionals.is_empty() {
        return Err(TailError::InvalidConfig(
            "need at least one conditional".into(),
        ));
    }
    if p == 0 {
        return Err(TailError::InvalidConfig(
            "split count must be at least 1".into(),
        ));
    }
    let mut ids: Vec<u64> = conditionals.iter().map(|c| c.id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(TailError::InvalidConfig(
            "conditional ids must be unique".into(),
        ));
    }
    if let Some(c) = conditionals.iter().find(|c| c.samples.is_empty()) {
        return Err(TailError::InvalidConfig(format!(
            "conditional {} has no samples",
            c.id
        )));
    }

    let per_conditional = conditionals
        .par_iter()
        .map(|c| {
            let stream = rng.derive(Purpose::Split, c.id, 0);
            match split_average(&c.samples, p, config, &stream) {
                Ok(est) => Ok(ConditionalEstimate {
                    id: c.id,
                    estimate: Some(est.value),
                    degenerate_splits: est.degenerate,
                }),
                Err(TailError::EstimationFailed { degenerate }) => Ok(ConditionalEstimate {
                    id: c.id,
                    estimate: None,
                    degenerate_splits: degenerate,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let max = per_conditional
        .iter()
        .filter_map(|c| c.estimate)
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.max(v)))
        });
    match max {
        Some(max) => Ok(CteResult {
            verdict: CteVerdict::from_max(max),
            per_conditional,
        }),
        None => Err(TailError::EstimationFailed {
            degenerate: per_conditional.iter().map(|c| c.degenerate_splits).sum(),
        }),
    }
}

/// Pooled peaks-over-threshold: concatenate every conditional and split-average
/// with `config.splits` groups.
pub fn pooled_pot(
    conditionals: &[ConditionalSamples],
    config: &EstimatorConfig,
    rng: &RngStream,
) -> Result<TailEstimate> {
    let total: usize = conditionals.iter().map(|c| c.samples.len()).sum();
    if total == 0 {
        return Err(TailError::InsufficientSamples { needed: 1, got: 0 });
    }
    let mut pooled = Vec::with_capacity(total);
    for c in conditionals {
        pooled.extend_from_slice(&c.samples);
    }
    split_average(&pooled, config.splits, config, rng)
}

/// Sign of a tail shape, with its value when positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailVerdict {
    Positive(f64),
    NonPositive,
}

impl TailVerdict {
    pub fn from_shape(shape: f64) -> Self {
        if shape > 0.0 {
            TailVerdict::Positive(shape)
        } else {
            TailVerdict::NonPositive
        }
    }
}

impl From<CteVerdict> for TailVerdict {
    fn from(v: CteVerdict) -> Self {
        TailVerdict::from_shape(v.value())
    }
}

/// Right tail of `|X|` from the shapes of the left tail (of `-X`) and the
/// right tail of `X`: the larger positive shape wins.
pub fn abs_tail(left: TailVerdict, right: TailVerdict) -> TailVerdict {
    match (left, right) {
        (TailVerdict::Positive(a), TailVerdict::Positive(b)) => TailVerdict::Positive(a.max(b)),
        (TailVerdict::Positive(a), TailVerdict::NonPositive)
        | (TailVerdict::NonPositive, TailVerdict::Positive(a)) => TailVerdict::Positive(a),
        (TailVerdict::NonPositive, TailVerdict::NonPositive) => TailVerdict::NonPositive,
    }
}

/// Tail of `X^alpha` for positive `X`: shapes scale by `alpha`.
pub fn power_tail(x: TailVerdict, alpha: f64) -> Result<TailVerdict> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(TailError::Domain(format!("power {alpha} must be positive")));
    }
    Ok(match x {
        TailVerdict::Positive(v) => TailVerdict::Positive(alpha * v),
        TailVerdict::NonPositive => TailVerdict::NonPositive,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MomentBound {
    /// `E|X|^r` is infinite for every `r` above this order.
    FiniteUpTo(f64),
    AllFinite,
}

pub fn moment_bound(x: TailVerdict) -> MomentBound {
    match x {
        TailVerdict::Positive(v) => MomentBound::FiniteUpTo(1.0 / v),
        TailVerdict::NonPositive => MomentBound::AllFinite,
    }
}

/// Tail of the loss `|Y - f(X)|^p` from the tails of the predictions.
pub fn prediction_tail_to_loss_tail(
    pred_left: TailVerdict,
    pred_right: TailVerdict,
    p: f64,
) -> Result<TailVerdict> {
    power_tail(abs_tail(pred_left, pred_right), p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ParetoTail;

    fn constant_groups(value_ladder: &[f64], id: u64) -> ConditionalSamples {
        ConditionalSamples::new(id, value_ladder.to_vec())
    }

    // eight samples, k = 1, Pickands = log2((x1 - x2) / (x2 - x4))
    fn pickands_group(shape: f64) -> Vec<f64> {
        vec![1.0 + shape.exp2(), 1.0, 0.5, 0.0, -1.0, -2.0, -3.0, -4.0]
    }

    #[test]
    fn max_rule_over_conditionals() {
        let c = vec![
            constant_groups(&pickands_group(0.2), 0),
            constant_groups(&pickands_group(0.9), 1),
        ];
        let r = ncte(&c, &EstimatorConfig::pickands()).unwrap();
        match r.verdict {
            CteVerdict::Positive(v) => assert!((v - 0.9).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert_eq!(r.per_conditional.len(), 2);
    }

    #[test]
    fn all_non_positive_carries_max() {
        let c = vec![
            constant_groups(&pickands_group(-0.4), 3),
            constant_groups(&pickands_group(-0.1), 4),
        ];
        let r = ncte(&c, &EstimatorConfig::pickands()).unwrap();
        match r.verdict {
            CteVerdict::NonPositive(v) => assert!((v + 0.1).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_conditionals_are_excluded() {
        let c = vec![
            ConditionalSamples::new(0, vec![2.0; 16]),
            constant_groups(&pickands_group(0.5), 1),
        ];
        let r = ncte(&c, &EstimatorConfig::pickands()).unwrap();
        assert!((r.verdict.value() - 0.5).abs() < 1e-12);
        assert_eq!(r.failed_conditionals(), 1);
        assert_eq!(r.degenerate_splits(), 1);

        let all_bad = vec![
            ConditionalSamples::new(0, vec![2.0; 16]),
            ConditionalSamples::new(1, vec![1.0; 16]),
        ];
        assert_eq!(
            ncte(&all_bad, &EstimatorConfig::pickands()).unwrap_err(),
            TailError::EstimationFailed { degenerate: 2 }
        );
    }

    #[test]
    fn input_validation() {
        assert!(ncte(&[], &EstimatorConfig::pickands()).is_err());
        let dup = vec![
            ConditionalSamples::new(1, pickands_group(0.1)),
            ConditionalSamples::new(1, pickands_group(0.2)),
        ];
        assert!(ncte(&dup, &EstimatorConfig::pickands()).is_err());
        assert!(ncte(
            &[ConditionalSamples::new(0, vec![])],
            &EstimatorConfig::pickands()
        )
        .is_err());
    }

    #[test]
    fn ncte_equals_cte_with_one_split() {
        let conds: Vec<_> = (0..4)
            .map(|i| {
                let xs = ParetoTail::new(0.3 + 0.2 * i as f64)
                    .unwrap()
                    .sample(&RngStream::new(5, Purpose::Samples, i, 0), 5000);
                ConditionalSamples::new(i, xs)
            })
            .collect();
        let cfg = EstimatorConfig::dedh();
        assert_eq!(
            ncte(&conds, &cfg).unwrap(),
            cte(&conds, 1, &cfg, &RngStream::root(99)).unwrap()
        );
    }

    #[test]
    fn pooled_single_conditional_is_split_average() {
        let xs = ParetoTail::new(0.5)
            .unwrap()
            .sample(&RngStream::new(1, Purpose::Samples, 0, 0), 20_000);
        let cfg = EstimatorConfig::pickands().with_splits(4);
        let rng = RngStream::root(3);
        let pooled = pooled_pot(&[ConditionalSamples::new(7, xs.clone())], &cfg, &rng).unwrap();
        assert_eq!(pooled, split_average(&xs, 4, &cfg, &rng).unwrap());
    }

    #[test]
    fn abs_tail_rules() {
        use TailVerdict::*;
        assert_eq!(abs_tail(Positive(0.5), Positive(1.0)), Positive(1.0));
        assert_eq!(abs_tail(NonPositive, NonPositive), NonPositive);
        assert_eq!(abs_tail(Positive(0.3), NonPositive), Positive(0.3));
    }

    #[test]
    fn power_tail_rules() {
        use TailVerdict::*;
        assert_eq!(power_tail(Positive(0.5), 2.0).unwrap(), Positive(1.0));
        assert_eq!(power_tail(Positive(1.0), 1.0).unwrap(), Positive(1.0));
        assert_eq!(power_tail(NonPositive, 3.0).unwrap(), NonPositive);
        assert!(power_tail(Positive(1.0), 0.0).is_err());
        assert!(power_tail(Positive(1.0), -1.0).is_err());
    }

    #[test]
    fn moment_bound_rules() {
        use TailVerdict::*;
        assert_eq!(moment_bound(Positive(1.0)), MomentBound::FiniteUpTo(1.0));
        assert_eq!(moment_bound(Positive(0.5)), MomentBound::FiniteUpTo(2.0));
        assert_eq!(moment_bound(NonPositive), MomentBound::AllFinite);
    }

    #[test]
    fn loss_tail_from_prediction_tails() {
        use TailVerdict::*;
        assert_eq!(
            prediction_tail_to_loss_tail(Positive(0.4), NonPositive, 2.0).unwrap(),
            Positive(0.8)
        );
        assert_eq!(
            prediction_tail_to_loss_tail(NonPositive, NonPositive, 1.7).unwrap(),
            NonPositive
        );
        assert_eq!(
            prediction_tail_to_loss_tail(Positive(1.0), Positive(0.5), 1.0).unwrap(),
            Positive(1.0)
        );
    }
}
