//! Regression harness for studying the tails of model predictions under
//! Monte Carlo cross validation: windowed time series, exact Gaussian-process
//! regression, polynomial kernel ridge, and the per-training-set tail
//! estimation that feeds cross-tail estimation.

mod data;
mod gp;
mod harness;
mod krr;

pub use data::{
    synthetic_series, window, SeriesKind, TimeSeriesDataset, WindowRow, WindowedDataset,
};
pub use gp::{gp_predictive_mean, GpConfig};
pub use harness::{
    harness_repeats, mc_cv_mse, prediction_tail_harness, HarnessConfig, HarnessResult, ModelSpec,
    Regressor,
};
pub use krr::{krr_predict, PolyConfig};

/// Per-feature centring and scaling fitted on the training inputs.
#[derive(Debug, Clone)]
pub(crate) struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub(crate) fn fit(xs: &[&[f64]]) -> Self {
        let dim = xs.first().map_or(0, |x| x.len());
        let n = xs.len() as f64;
        let mut mean = vec![0.0; dim];
        for x in xs {
            for (m, v) in mean.iter_mut().zip(x.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut scale = vec![0.0; dim];
        for x in xs {
            for ((s, v), m) in scale.iter_mut().zip(x.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in scale.iter_mut() {
            *s = (*s / n).sqrt();
            if !(*s > 0.0) {
                *s = 1.0;
            }
        }
        Self { mean, scale }
    }

    pub(crate) fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}
