//! Order statistics and the Pickands / DEdH shape estimators, plus split
//! averaging: estimate on `p` disjoint random groups and average.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TailError};
use crate::rng::RngStream;

/// Smallest sample count on which a shape estimate is attempted.
pub const MIN_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Pickands,
    Dedh,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Pickands => "pickands",
            EstimatorKind::Dedh => "dedh",
        }
    }

    /// Default fraction of the sample used as the top-`k` block.
    pub fn default_fraction(&self) -> f64 {
        match self {
            EstimatorKind::Pickands => 0.02,
            EstimatorKind::Dedh => 0.03,
        }
    }

    fn max_fraction(&self) -> f64 {
        match self {
            EstimatorKind::Pickands => 0.25,
            EstimatorKind::Dedh => 0.5,
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = TailError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pickands" => Ok(EstimatorKind::Pickands),
            "dedh" | "moment" => Ok(EstimatorKind::Dedh),
            other => Err(TailError::InvalidConfig(format!(
                "unknown estimator '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KRule {
    Fixed(usize),
    Fraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    pub k_rule: KRule,
    pub splits: usize,
}

impl EstimatorConfig {
    /// Default fraction rule, no splitting.
    pub fn new(kind: EstimatorKind) -> Self {
        Self {
            kind,
            k_rule: KRule::Fraction(kind.default_fraction()),
            splits: 1,
        }
    }

    pub fn pickands() -> Self {
        Self::new(EstimatorKind::Pickands)
    }

    pub fn dedh() -> Self {
        Self::new(EstimatorKind::Dedh)
    }

    pub fn with_splits(mut self, splits: usize) -> Self {
        self.splits = splits;
        self
    }

    pub fn with_k_rule(mut self, k_rule: KRule) -> Self {
        self.k_rule = k_rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.splits == 0 {
            return Err(TailError::InvalidConfig(
                "split count must be at least 1".into(),
            ));
        }
        match self.k_rule {
            KRule::Fixed(0) => Err(TailError::InvalidConfig(
                "fixed k must be at least 1".into(),
            )),
            KRule::Fraction(q) if !(q > 0.0 && q <= self.kind.max_fraction()) => {
                Err(TailError::InvalidConfig(format!(
                    "k fraction {q} outside (0, {}] for {}",
                    self.kind.max_fraction(),
                    self.kind
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Samples in descending order; `values[0]` is the largest.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedBatch {
    values: Vec<f64>,
}

impl SortedBatch {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `X_{i,n}`, 1-indexed as in the usual order-statistic notation.
    fn order_stat(&self, i: usize) -> f64 {
        self.values[i - 1]
    }
}

/// Stable descending sort (ties keep input order).
pub fn sort_descending(samples: &[f64]) -> SortedBatch {
    let mut values = samples.to_vec();
    values.sort_by(|a, b| b.total_cmp(a));
    SortedBatch { values }
}

impl From<Vec<f64>> for SortedBatch {
    fn from(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        SortedBatch { values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub value: f64,
    pub estimator: EstimatorKind,
    pub k: usize,
    pub n: usize,
    pub splits: usize,
    /// Groups skipped because their spacings or moments degenerated.
    pub degenerate: usize,
}

impl TailEstimate {
    fn single(value: f64, estimator: EstimatorKind, k: usize, n: usize) -> Self {
        Self {
            value,
            estimator,
            k,
            n,
            splits: 1,
            degenerate: 0,
        }
    }
}

pub fn pickands(batch: &SortedBatch, k: usize) -> Result<TailEstimate> {
    let n = batch.len();
    if k == 0 {
        return Err(TailError::InvalidConfig("k must be at least 1".into()));
    }
    if 4 * k > n {
        return Err(TailError::InsufficientSamples {
            needed: 4 * k,
            got: n,
        });
    }
    let x_k = batch.order_stat(k);
    let x_2k = batch.order_stat(2 * k);
    let x_4k = batch.order_stat(4 * k);
    let upper = x_k - x_2k;
    let lower = x_2k - x_4k;
    if lower == 0.0 {
        return Err(TailError::DegenerateSpacing);
    }
    let ratio = upper / lower;
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(TailError::DegenerateSpacing);
    }
    Ok(TailEstimate::single(
        ratio.ln() / std::f64::consts::LN_2,
        EstimatorKind::Pickands,
        k,
        n,
    ))
}

pub fn dedh(batch: &SortedBatch, k: usize) -> Result<TailEstimate> {
    let n = batch.len();
    if k == 0 {
        return Err(TailError::InvalidConfig("k must be at least 1".into()));
    }
    if k + 1 > n {
        return Err(TailError::InsufficientSamples {
            needed: k + 1,
            got: n,
        });
    }
    let anchor = batch.order_stat(k + 1);
    if !(anchor > 0.0) {
        return Err(TailError::NonPositiveSample(k + 1));
    }
    let (mut h1, mut h2) = (0.0, 0.0);
    for &x in &batch.values[..k] {
        // ln(x / anchor) via log1p of the relative excess
        let l = ((x - anchor) / anchor).ln_1p();
        h1 += l;
        h2 += l * l;
    }
    let kf = k as f64;
    h1 /= kf;
    h2 /= kf;
    if h2 == 0.0 || h1 * h1 == h2 {
        return Err(TailError::DegenerateMoments);
    }
    let value = 1.0 + h1 + 0.5 / (h1 * h1 / h2 - 1.0);
    if !value.is_finite() {
        return Err(TailError::DegenerateMoments);
    }
    Ok(TailEstimate::single(value, EstimatorKind::Dedh, k, n))
}

pub fn default_k(n: usize, config: &EstimatorConfig) -> Result<usize> {
    if n < MIN_SAMPLES {
        return Err(TailError::InsufficientSamples {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let k = match config.k_rule {
        KRule::Fraction(q) => ((q * n as f64).floor() as usize).max(1),
        KRule::Fixed(k) => match config.kind {
            EstimatorKind::Pickands => k.min(n / 4),
            EstimatorKind::Dedh => k.min(n - 1),
        },
    };
    Ok(k)
}

/// Base estimator on one sorted batch with the configured k-rule.
pub fn estimate_sorted(batch: &SortedBatch, config: &EstimatorConfig) -> Result<TailEstimate> {
    let k = default_k(batch.len(), config)?;
    match config.kind {
        EstimatorKind::Pickands => pickands(batch, k),
        EstimatorKind::Dedh => dedh(batch, k),
    }
}

pub fn estimate(samples: &[f64], config: &EstimatorConfig) -> Result<TailEstimate> {
    config.validate()?;
    estimate_sorted(&sort_descending(samples), config)
}

/// Splits `samples` into `p` equal random groups (remainder dropped),
/// estimates each and averages. Degenerate groups are excluded from the mean
/// and counted; `p = 1` is the plain base estimator.
pub fn split_average(
    samples: &[f64],
    p: usize,
    config: &EstimatorConfig,
    rng: &RngStream,
) -> Result<TailEstimate> {
    config.validate()?;
    if p == 0 {
        return Err(TailError::InvalidConfig(
            "split count must be at least 1".into(),
        ));
    }
    if p == 1 {
        return match estimate(samples, config) {
            Ok(est) => Ok(est),
            Err(e) if e.is_degenerate() => Err(TailError::EstimationFailed { degenerate: 1 }),
            Err(e) => Err(e),
        };
    }
    let group = samples.len() / p;
    if group < MIN_SAMPLES {
        return Err(TailError::InsufficientSamples {
            needed: MIN_SAMPLES * p,
            got: samples.len(),
        });
    }
    let mut shuffled = samples.to_vec();
    shuffled.shuffle(&mut rng.rng());
    let mut est = average_groups(shuffled.chunks_exact(group).take(p), config)?;
    est.splits = p;
    Ok(est)
}

/// Mean of the base estimates over `groups`, skipping degenerate ones.
pub fn average_groups<'a>(
    groups: impl Iterator<Item = &'a [f64]>,
    config: &EstimatorConfig,
) -> Result<TailEstimate> {
    let mut sum = 0.0;
    let mut ok = 0usize;
    let mut degenerate = 0usize;
    let mut k_used = 0;
    let mut n_used = 0;
    for chunk in groups {
        n_used = chunk.len();
        match estimate_sorted(&SortedBatch::from(chunk.to_vec()), config) {
            Ok(est) => {
                sum += est.value;
                k_used = est.k;
                ok += 1;
            }
            Err(e) if e.is_degenerate() => degenerate += 1,
            Err(e) => return Err(e),
        }
    }
    if ok == 0 {
        return Err(TailError::EstimationFailed { degenerate });
    }
    Ok(TailEstimate {
        value: sum / ok as f64,
        estimator: config.kind,
        k: k_used,
        n: n_used,
        splits: ok + degenerate,
        degenerate,
    })
}

/// Type-1 empirical quantile: the `ceil(p n)`-th smallest sample.
pub fn empirical_quantile(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(TailError::InsufficientSamples { needed: 1, got: 0 });
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(TailError::domain(format!("percentile {p} outside (0, 1)")));
    }
    let mut v = samples.to_vec();
    let rank = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len());
    let (_, nth, _) = v.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*nth)
}

/// Minimum exceedance count accepted by [`threshold_excesses`].
pub const MIN_EXCEEDANCES: usize = 10;

/// Excesses over the empirical `percentile` for samples strictly above it.
pub fn threshold_excesses(samples: &[f64], percentile: f64) -> Result<Vec<f64>> {
    let threshold = empirical_quantile(samples, percentile)?;
    let excesses: Vec<f64> = samples
        .iter()
        .filter(|&&x| x > threshold)
        .map(|&x| x - threshold)
        .collect();
    if excesses.len() < MIN_EXCEEDANCES {
        return Err(TailError::InsufficientSamples {
            needed: MIN_EXCEEDANCES,
            got: excesses.len(),
        });
    }
    Ok(excesses)
}
