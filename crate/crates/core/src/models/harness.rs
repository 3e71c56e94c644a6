use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{WindowRow, WindowedDataset};
use super::gp::{gp_predictive_mean, GpConfig};
use super::krr::{krr_predict, PolyConfig};
use crate::cte::{cte, pooled_pot, ConditionalSamples, CteResult};
use crate::error::{Result, TailError};
use crate::estimators::{empirical_quantile, EstimatorConfig, TailEstimate};
use crate::rng::{Purpose, RngStream};

/// Anything that can be fitted on a training subset and queried.
pub trait Regressor: Sync {
    fn fit_predict(&self, train: &[WindowRow], query_xs: &[Vec<f64>]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    Gp(GpConfig),
    Krr(PolyConfig),
}

impl ModelSpec {
    pub fn family(&self) -> &'static str {
        match self {
            ModelSpec::Gp(_) => "gp",
            ModelSpec::Krr(_) => "poly",
        }
    }

    /// The swept hyperparameter: length scale or degree.
    pub fn param(&self) -> f64 {
        match self {
            ModelSpec::Gp(c) => c.length_scale,
            ModelSpec::Krr(c) => c.degree as f64,
        }
    }
}

impl Regressor for ModelSpec {
    fn fit_predict(&self, train: &[WindowRow], query_xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        match self {
            ModelSpec::Gp(c) => gp_predictive_mean(train, c, query_xs),
            ModelSpec::Krr(c) => krr_predict(train, c, query_xs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub train_size: usize,
    pub draws: usize,
    pub splits: usize,
    pub estimator: EstimatorConfig,
    pub repeats: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            train_size: 340,
            draws: 100,
            splits: 5,
            estimator: EstimatorConfig::pickands(),
            repeats: 10,
        }
    }
}

impl HarnessConfig {
    pub fn validate(&self, data: &WindowedDataset) -> Result<()> {
        if self.train_size == 0 || self.train_size >= data.len() {
            return Err(TailError::InvalidConfig(format!(
                "train size {} must be in [1, {})",
                self.train_size,
                data.len()
            )));
        }
        if self.draws == 0 {
            return Err(TailError::InvalidConfig("draws must be at least 1".into()));
        }
        if self.splits == 0 {
            return Err(TailError::InvalidConfig("splits must be at least 1".into()));
        }
        self.estimator.validate()
    }
}

struct DrawOutput {
    /// Predictions on every row, in row order.
    predictions: Vec<f64>,
    test_mse: f64,
}

fn run_draw<M: Regressor + ?Sized>(
    data: &WindowedDataset,
    model: &M,
    train_size: usize,
    stream: &RngStream,
) -> Result<DrawOutput> {
    let n = data.len();
    let mut in_train = vec![false; n];
    let train: Vec<WindowRow> = sample(&mut stream.rng(), n, train_size)
        .into_iter()
        .map(|i| {
            in_train[i] = true;
            data.rows[i].clone()
        })
        .collect();
    let queries: Vec<Vec<f64>> = data.rows.iter().map(|r| r.x.clone()).collect();
    let predictions = model.fit_predict(&train, &queries)?;
    let (sum, count) = predictions
        .iter()
        .zip(&data.rows)
        .zip(&in_train)
        .filter(|(_, &t)| !t)
        .fold((0.0, 0usize), |(s, c), ((p, r), _)| {
            (s + (p - r.y) * (p - r.y), c + 1)
        });
    Ok(DrawOutput {
        predictions,
        test_mse: sum / count as f64,
    })
}

fn draw_stream(rng: &RngStream, draw: usize) -> RngStream {
    rng.derive(Purpose::Train, draw as u64, 0)
}

fn run_draws<M: Regressor + ?Sized>(
    data: &WindowedDataset,
    model: &M,
    harness: &HarnessConfig,
    rng: &RngStream,
) -> Result<Vec<DrawOutput>> {
    (0..harness.draws)
        .into_par_iter()
        .map(|i| run_draw(data, model, harness.train_size, &draw_stream(rng, i)))
        .collect()
}

/// Monte Carlo cross-validation: mean over draws of the held-out MSE.
pub fn mc_cv_mse<M: Regressor + ?Sized>(
    data: &WindowedDataset,
    model: &M,
    harness: &HarnessConfig,
    rng: &RngStream,
) -> Result<f64> {
    harness.validate(data)?;
    let draws = run_draws(data, model, harness, rng)?;
    Ok(draws.iter().map(|d| d.test_mse).sum::<f64>() / draws.len() as f64)
}

#[derive(Debug, Clone)]
pub struct HarnessResult {
    /// Per-draw split-averaged estimates and their maximum.
    pub cte: CteResult,
    /// Pooled POT on the union of all draws' |predictions|; kept as a
    /// result so a degenerate pooled fit does not hide the CTE verdict.
    pub pooled: std::result::Result<TailEstimate, TailError>,
    pub mse: f64,
    pub draw_mse: Vec<f64>,
    /// 97th percentile of |predictions| for each draw.
    pub thresholds: Vec<f64>,
}

pub const THRESHOLD_PERCENTILE: f64 = 0.97;

pub fn prediction_tail_harness<M: Regressor + ?Sized>(
    data: &WindowedDataset,
    model: &M,
    harness: &HarnessConfig,
    rng: &RngStream,
) -> Result<HarnessResult> {
    harness.validate(data)?;
    let draws = run_draws(data, model, harness, rng)?;
    let draw_mse: Vec<f64> = draws.iter().map(|d| d.test_mse).collect();
    let mse = draw_mse.iter().sum::<f64>() / draw_mse.len() as f64;
    let conditionals: Vec<ConditionalSamples> = draws
        .into_iter()
        .enumerate()
        .map(|(i, d)| ConditionalSamples {
            id: i as u64,
            samples: d.predictions.iter().map(|p| p.abs()).collect(),
        })
        .collect();
    let thresholds = conditionals
        .iter()
        .map(|c| empirical_quantile(&c.samples, THRESHOLD_PERCENTILE))
        .collect::<Result<Vec<_>>>()?;
    let cte = cte(
        &conditionals,
        harness.splits,
        &harness.estimator,
        &rng.derive(Purpose::Split, 0, 0),
    )?;
    let pooled = pooled_pot(
        &conditionals,
        &harness.estimator.with_splits(harness.splits),
        &rng.derive(Purpose::Pooled, 0, 0),
    );
    Ok(HarnessResult {
        cte,
        pooled,
        mse,
        draw_mse,
        thresholds,
    })
}

/// Runs `harness.repeats` independent harness evaluations. Repeat `r` uses the
/// same training subsets for every model, so sweeps are paired.
pub fn harness_repeats<M: Regressor + ?Sized>(
    data: &WindowedDataset,
    model: &M,
    harness: &HarnessConfig,
    seed: u64,
) -> Vec<Result<HarnessResult>> {
    (0..harness.repeats)
        .map(|r| {
            let stream = RngStream::root(seed).derive(Purpose::User, r as u64, 0);
            prediction_tail_harness(data, model, harness, &stream)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::split_average;
    use crate::models::data::{synthetic_series, window, SeriesKind};

    struct Oracle(f64);

    impl Regressor for Oracle {
        fn fit_predict(&self, _train: &[WindowRow], query_xs: &[Vec<f64>]) -> Result<Vec<f64>> {
            // the windowed targets below are x[1] + 1
            Ok(query_xs.iter().map(|x| x[1] + 1.0 + self.0).collect())
        }
    }

    struct Constant;

    impl Regressor for Constant {
        fn fit_predict(&self, _train: &[WindowRow], query_xs: &[Vec<f64>]) -> Result<Vec<f64>> {
            Ok(vec![2.5; query_xs.len()])
        }
    }

    fn ramp(n: usize) -> WindowedDataset {
        let values: Vec<f64> = (0..n).map(|i| i as f64).collect();
        window(
            &super::super::TimeSeriesDataset {
                name: "ramp".into(),
                values,
            },
            2,
        )
        .unwrap()
    }

    fn small_harness(draws: usize, splits: usize) -> HarnessConfig {
        HarnessConfig {
            train_size: 40,
            draws,
            splits,
            estimator: EstimatorConfig::pickands(),
            repeats: 1,
        }
    }

    #[test]
    fn oracle_mse() {
        let data = ramp(200);
        let h = small_harness(7, 1);
        let rng = RngStream::root(3);
        assert_eq!(mc_cv_mse(&data, &Oracle(0.0), &h, &rng).unwrap(), 0.0);
        assert!((mc_cv_mse(&data, &Oracle(1.0), &h, &rng).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_model_fails_with_full_degenerate_count() {
        let data = ramp(500);
        let h = small_harness(4, 2);
        match prediction_tail_harness(&data, &Constant, &h, &RngStream::root(1)) {
            Err(TailError::EstimationFailed { degenerate }) => assert_eq!(degenerate, 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_draw_single_split_is_split_average() {
        let rng = RngStream::new(9, Purpose::Series, 0, 0);
        let data = window(&synthetic_series(SeriesKind::ar1(), 600, &rng).unwrap(), 2).unwrap();
        let model = ModelSpec::Gp(GpConfig::new(0.5));
        let h = HarnessConfig {
            train_size: 100,
            draws: 1,
            splits: 1,
            estimator: EstimatorConfig::pickands(),
            repeats: 1,
        };
        let stream = RngStream::root(4);
        let res = prediction_tail_harness(&data, &model, &h, &stream).unwrap();
        let out = run_draw(&data, &model, h.train_size, &draw_stream(&stream, 0)).unwrap();
        let abs: Vec<f64> = out.predictions.iter().map(|p| p.abs()).collect();
        let direct = split_average(&abs, 1, &h.estimator, &RngStream::root(0)).unwrap();
        assert_eq!(res.cte.verdict.value(), direct.value);
        assert_eq!(res.mse, out.test_mse);
    }

    #[test]
    fn mse_independent_of_thread_count() {
        let rng = RngStream::new(5, Purpose::Series, 0, 0);
        let data = window(
            &synthetic_series(SeriesKind::sine_plus_noise(), 400, &rng).unwrap(),
            2,
        )
        .unwrap();
        let model = ModelSpec::Krr(PolyConfig::new(3));
        let h = small_harness(6, 1);
        let stream = RngStream::root(8);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let three = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let a = one.install(|| mc_cv_mse(&data, &model, &h, &stream).unwrap());
        let b = three.install(|| mc_cv_mse(&data, &model, &h, &stream).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn overfit_length_scale_has_higher_test_error() {
        let rng = RngStream::new(11, Purpose::Series, 0, 0);
        let data = window(
            &synthetic_series(SeriesKind::sine_plus_noise(), 800, &rng).unwrap(),
            2,
        )
        .unwrap();
        let h = HarnessConfig {
            train_size: 150,
            draws: 5,
            ..HarnessConfig::default()
        };
        let stream = RngStream::root(2);
        let small = mc_cv_mse(&data, &ModelSpec::Gp(GpConfig::new(0.05)), &h, &stream).unwrap();
        let best = mc_cv_mse(&data, &ModelSpec::Gp(GpConfig::new(3.0)), &h, &stream).unwrap();
        assert!(best < small, "{best} vs {small}");
    }

    #[test]
    fn rejects_invalid_harness() {
        let data = ramp(50);
        let mut h = small_harness(1, 1);
        h.train_size = 48;
        assert!(mc_cv_mse(&data, &Constant, &h, &RngStream::root(0)).is_err());
        h.train_size = 10;
        h.splits = 0;
        assert!(prediction_tail_harness(&data, &Constant, &h, &RngStream::root(0)).is_err());
    }
}
