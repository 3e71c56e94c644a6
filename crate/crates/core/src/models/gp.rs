use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::data::WindowRow;
use super::Standardizer;
use crate::error::{Result, TailError};

/// Exact GP regression with a squared-exponential kernel on standardized
/// inputs. Only the predictive mean is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    pub length_scale: f64,
    pub noise_variance: f64,
}

/// Largest noise variance tried when the kernel matrix will not factor.
pub const MAX_NOISE_VARIANCE: f64 = 1e-2;

impl GpConfig {
    pub fn new(length_scale: f64) -> Self {
        Self {
            length_scale,
            noise_variance: 1e-6,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(TailError::InvalidConfig(format!(
                "length scale {} must be positive",
                self.length_scale
            )));
        }
        if !(self.noise_variance >= 1e-10) {
            return Err(TailError::InvalidConfig(
                "noise variance must be at least 1e-10".into(),
            ));
        }
        Ok(())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn gp_predictive_mean(
    train: &[WindowRow],
    config: &GpConfig,
    query_xs: &[Vec<f64>],
) -> Result<Vec<f64>> {
    config.validate()?;
    if train.is_empty() {
        return Err(TailError::InvalidConfig(
            "GP needs at least one training row".into(),
        ));
    }
    let xs: Vec<&[f64]> = train.iter().map(|r| r.x.as_slice()).collect();
    let std = Standardizer::fit(&xs);
    let train_x: Vec<Vec<f64>> = xs.iter().map(|x| std.apply(x)).collect();
    let n = train_x.len();
    let inv_two_l2 = 1.0 / (2.0 * config.length_scale * config.length_scale);
    let kernel = DMatrix::from_fn(n, n, |i, j| {
        (-sq_dist(&train_x[i], &train_x[j]) * inv_two_l2).exp()
    });
    let y = DVector::from_iterator(n, train.iter().map(|r| r.y));

    let mut noise = config.noise_variance;
    let alpha = loop {
        let mut k = kernel.clone();
        for i in 0..n {
            k[(i, i)] += noise;
        }
        if let Some(chol) = k.cholesky() {
            break chol.solve(&y);
        }
        noise *= 10.0;
        if noise > MAX_NOISE_VARIANCE * (1.0 + 1e-9) {
            return Err(TailError::IllConditioned(format!(
                "GP kernel matrix not positive definite up to noise {MAX_NOISE_VARIANCE}"
            )));
        }
    };

    Ok(query_xs
        .iter()
        .map(|q| {
            let q = std.apply(q);
            train_x
                .iter()
                .zip(alpha.iter())
                .map(|(x, a)| a * (-sq_dist(&q, x) * inv_two_l2).exp())
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(x: &[f64], y: f64) -> WindowRow {
        WindowRow { x: x.to_vec(), y }
    }

    #[test]
    fn single_pair_closed_form() {
        let cfg = GpConfig {
            length_scale: 0.8,
            noise_variance: 0.25,
        };
        let train = [row(&[1.0, 2.0], 3.0)];
        let q = vec![1.5, 1.0];
        let k = (-(0.25 + 1.0) / (2.0 * 0.64f64)).exp();
        let got = gp_predictive_mean(&train, &cfg, &[q]).unwrap()[0];
        assert!((got - 3.0 * k / 1.25).abs() < 1e-12);
    }

    #[test]
    fn interpolates_with_tiny_noise() {
        let train: Vec<WindowRow> = (0..20)
            .map(|i| {
                let t = i as f64 * 0.37;
                row(&[t.sin(), t.cos() * 2.0], (3.0 * t).sin())
            })
            .collect();
        let cfg = GpConfig {
            length_scale: 0.5,
            noise_variance: 1e-10,
        };
        let qs: Vec<Vec<f64>> = train.iter().map(|r| r.x.clone()).collect();
        let pred = gp_predictive_mean(&train, &cfg, &qs).unwrap();
        for (p, r) in pred.iter().zip(&train) {
            assert!((p - r.y).abs() < 1e-3, "{p} vs {}", r.y);
        }
    }

    #[test]
    fn huge_length_scale_is_flat() {
        let train: Vec<WindowRow> = (0..30)
            .map(|i| {
                let t = i as f64;
                row(&[t, (t * 0.3).sin()], (t * 0.5).cos() - 0.1)
            })
            .collect();
        let mean = train.iter().map(|r| r.y).sum::<f64>() / 30.0;
        let centred: Vec<WindowRow> = train.iter().map(|r| row(&r.x, r.y - mean)).collect();
        let cfg = GpConfig::new(1e8);
        let qs: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 * 0.7, 0.2]).collect();
        let pred = gp_predictive_mean(&centred, &cfg, &qs).unwrap();
        let (lo, hi) = pred
            .iter()
            .fold((f64::MAX, f64::MIN), |(l, h), &p| (l.min(p), h.max(p)));
        assert!(hi - lo < 1e-2, "spread {}", hi - lo);
    }

    #[test]
    fn training_order_does_not_matter() {
        let train: Vec<WindowRow> = (0..15)
            .map(|i| {
                let t = i as f64 * 0.9;
                row(&[t.sin(), t], t.cos())
            })
            .collect();
        let mut rev = train.clone();
        rev.reverse();
        let qs: Vec<Vec<f64>> = (0..10).map(|i| vec![(i as f64).cos(), i as f64]).collect();
        let cfg = GpConfig::new(1.3);
        let a = gp_predictive_mean(&train, &cfg, &qs).unwrap();
        let b = gp_predictive_mean(&rev, &cfg, &qs).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let train = [row(&[0.0, 0.0], 1.0)];
        assert!(gp_predictive_mean(&train, &GpConfig::new(0.0), &[]).is_err());
        assert!(gp_predictive_mean(&[], &GpConfig::new(1.0), &[]).is_err());
    }
}
