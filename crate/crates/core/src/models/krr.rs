use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::data::WindowRow;
use super::Standardizer;
use crate::error::{Result, TailError};

/// Kernel ridge regression with `k(x, x') = (x . x' + offset)^degree` on
/// standardized inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyConfig {
    pub degree: u32,
    pub ridge: f64,
    pub offset: f64,
}

/// Number of x10 ridge escalations tried when the system will not factor.
pub const MAX_RIDGE_ESCALATIONS: u32 = 8;

impl PolyConfig {
    pub fn new(degree: u32) -> Self {
        Self {
            degree,
            ridge: 1e-6,
            offset: 1.0,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn krr_predict(
    train: &[WindowRow],
    config: &PolyConfig,
    query_xs: &[Vec<f64>],
) -> Result<Vec<f64>> {
    if config.degree == 0 {
        return Err(TailError::InvalidConfig(
            "polynomial degree must be at least 1".into(),
        ));
    }
    if !(config.ridge > 0.0) {
        return Err(TailError::InvalidConfig("ridge must be positive".into()));
    }
    if train.is_empty() {
        return Err(TailError::InvalidConfig(
            "kernel ridge needs at least one training row".into(),
        ));
    }
    if query_xs.is_empty() {
        return Ok(Vec::new());
    }
    let xs: Vec<&[f64]> = train.iter().map(|r| r.x.as_slice()).collect();
    let std = Standardizer::fit(&xs);
    let train_x: Vec<Vec<f64>> = xs.iter().map(|x| std.apply(x)).collect();
    let n = train_x.len();
    let deg = config.degree as i32;
    let kern = |a: &[f64], b: &[f64]| (dot(a, b) + config.offset).powi(deg);
    let kernel = DMatrix::from_fn(n, n, |i, j| kern(&train_x[i], &train_x[j]));
    let y = DVector::from_iterator(n, train.iter().map(|r| r.y));

    let mut ridge = config.ridge;
    let mut alpha = None;
    for _ in 0..=MAX_RIDGE_ESCALATIONS {
        let mut k = kernel.clone();
        for i in 0..n {
            k[(i, i)] += ridge;
        }
        if let Some(chol) = k.cholesky() {
            alpha = Some(chol.solve(&y));
            break;
        }
        ridge *= 10.0;
    }
    let alpha = alpha.ok_or_else(|| {
        TailError::IllConditioned(format!(
            "polynomial kernel system singular up to ridge {ridge}"
        ))
    })?;

    Ok(query_xs
        .iter()
        .map(|q| {
            let q = std.apply(q);
            train_x
                .iter()
                .zip(alpha.iter())
                .map(|(x, a)| a * kern(&q, x))
                .sum()
        })
        .collect())
}
