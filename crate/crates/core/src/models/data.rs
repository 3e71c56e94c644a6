use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TailError};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesDataset {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRow {
    pub x: Vec<f64>,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowedDataset {
    pub rows: Vec<WindowRow>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Sliding windows of width `w`, stride 1: `x = values[i..i+w]`, `y = values[i+w]`.
pub fn window(series: &TimeSeriesDataset, w: usize) -> Result<WindowedDataset> {
    if w == 0 {
        return Err(TailError::Domain("window width must be at least 1".into()));
    }
    if series.values.len() < w + 1 {
        return Err(TailError::Domain(format!(
            "series '{}' has {} values, need at least {}",
            series.name,
            series.values.len(),
            w + 1
        )));
    }
    let rows = series
        .values
        .windows(w + 1)
        .map(|win| WindowRow {
            x: win[..w].to_vec(),
            y: win[w],
        })
        .collect();
    Ok(WindowedDataset { rows })
}

/// Generators standing in for real univariate series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SeriesKind {
    /// `x_t = phi x_{t-1} + noise_sd e_t`, started at zero.
    Ar1 { phi: f64, noise_sd: f64 },
    /// `amplitude sin(2 pi t / period) + noise_sd e_t`.
    SinePlusNoise {
        period: f64,
        amplitude: f64,
        noise_sd: f64,
    },
}

impl SeriesKind {
    pub fn ar1() -> Self {
        SeriesKind::Ar1 {
            phi: 0.9,
            noise_sd: 1.0,
        }
    }

    pub fn sine_plus_noise() -> Self {
        SeriesKind::SinePlusNoise {
            period: 50.0,
            amplitude: 1.0,
            noise_sd: 0.3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SeriesKind::Ar1 { .. } => "ar1",
            SeriesKind::SinePlusNoise { .. } => "sine-plus-noise",
        }
    }
}

pub fn synthetic_series(
    kind: SeriesKind,
    length: usize,
    rng: &RngStream,
) -> Result<TimeSeriesDataset> {
    if length < 3 {
        return Err(TailError::Domain("series length must be at least 3".into()));
    }
    let mut r = rng.rng();
    let mut noise = || -> f64 { r.sample(StandardNormal) };
    let values = match kind {
        SeriesKind::Ar1 { phi, noise_sd } => {
            let mut prev = 0.0;
            (0..length)
                .map(|_| {
                    prev = phi * prev + noise_sd * noise();
                    prev
                })
                .collect()
        }
        SeriesKind::SinePlusNoise {
            period,
            amplitude,
            noise_sd,
        } => (0..length)
            .map(|t| {
                amplitude * (std::f64::consts::TAU * t as f64 / period).sin() + noise_sd * noise()
            })
            .collect(),
    };
    Ok(TimeSeriesDataset {
        name: kind.name().to_string(),
        values,
    })
}
