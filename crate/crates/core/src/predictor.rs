//! Causal second-order Savitzky-Golay extrapolation of a head-angle stream.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictorError {
    #[error("invalid predictor configuration: {0}")]
    InvalidConfig(String),
    #[error("least-squares design matrix is numerically singular")]
    IllConditioned,
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("samples are not uniformly spaced at {expected_ms} ms (interval {index} is {found_ms} ms)")]
    NonUniformSampling {
        index: usize,
        expected_ms: f64,
        found_ms: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub sample_rate_hz: f64,
    pub window_samples: usize,
    pub horizon_ms: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 1000.0,
            window_samples: 51,
            horizon_ms: 26.0,
        }
    }
}

pub const ORDER: usize = 2;

impl PredictorConfig {
    pub fn validate(&self) -> Result<(), PredictorError> {
        if self.window_samples < 5 || self.window_samples.is_multiple_of(2) {
            return Err(PredictorError::InvalidConfig(format!(
                "window must be odd and at least 5, got {}",
                self.window_samples
            )));
        }
        if !(self.horizon_ms >= 0.0) || !self.horizon_ms.is_finite() {
            return Err(PredictorError::InvalidConfig(format!(
                "horizon must be non-negative, got {}",
                self.horizon_ms
            )));
        }
        if !(self.sample_rate_hz > 0.0) || !self.sample_rate_hz.is_finite() {
            return Err(PredictorError::InvalidConfig(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        Ok(())
    }

    pub fn sample_period_ms(&self) -> f64 {
        1000.0 / self.sample_rate_hz
    }

    pub fn horizon_samples(&self) -> f64 {
        self.horizon_ms / self.sample_period_ms()
    }
}

/// Linear weights over the trailing window (oldest sample first) that
/// evaluate the least-squares quadratic at `t_last + horizon`.
pub fn predictor_weights(config: &PredictorConfig) -> Result<Vec<f64>, PredictorError> {
    config.validate()?;
    let n = config.window_samples;
    // Sample times relative to the newest sample, scaled to [-1, 0].
    let scale = (n - 1) as f64;
    let design = DMatrix::from_fn(n, ORDER + 1, |i, k| {
        let t = (i as f64 - scale) / scale;
        t.powi(k as i32)
    });
    let h = config.horizon_samples() / scale;
    let eval = DVector::from_fn(ORDER + 1, |k, _| h.powi(k as i32));

    let qr = design.qr();
    let r = qr.r();
    if r.diagonal().iter().any(|d| d.abs() < 1e-12) {
        return Err(PredictorError::IllConditioned);
    }
    // w = Q R^-T e
    let y = r
        .transpose()
        .solve_lower_triangular(&eval)
        .ok_or(PredictorError::IllConditioned)?;
    let w = qr.q() * y;
    Ok(w.iter().copied().collect())
}

#[derive(Debug, Clone)]
pub struct Predictor {
    config: PredictorConfig,
    weights: Vec<f64>,
}

impl Predictor {
    pub fn new(config: PredictorConfig) -> Result<Self, PredictorError> {
        let weights = predictor_weights(&config)?;
        Ok(Self { config, weights })
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.config
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Extrapolates from the last `window_samples` angles of `angles_deg`.
    pub fn predict(&self, angles_deg: &[f64]) -> Result<f64, PredictorError> {
        let n = self.weights.len();
        if angles_deg.len() < n {
            return Err(PredictorError::InsufficientSamples {
                needed: n,
                got: angles_deg.len(),
            });
        }
        let window = &angles_deg[angles_deg.len() - n..];
        Ok(self.weights.iter().zip(window).map(|(w, a)| w * a).sum())
    }

    /// One prediction per sample; `None` until the window has filled.
    pub fn predict_stream(&self, stream: &SampleStream) -> Vec<Option<f64>> {
        let n = self.weights.len();
        (0..stream.len())
            .map(|i| {
                if i + 1 < n {
                    None
                } else {
                    self.predict(&stream.angles_deg[..=i]).ok()
                }
            })
            .collect()
    }
}

/// Uniformly sampled encoder readings.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    pub t_ms: Vec<f64>,
    pub angles_deg: Vec<f64>,
}

impl SampleStream {
    /// Checks that timestamps advance by exactly one sample period within
    /// `rel_tol` of the period.
    pub fn new(
        t_ms: Vec<f64>,
        angles_deg: Vec<f64>,
        sample_rate_hz: f64,
        rel_tol: f64,
    ) -> Result<Self, PredictorError> {
        assert_eq!(t_ms.len(), angles_deg.len());
        let period = 1000.0 / sample_rate_hz;
        for (i, w) in t_ms.windows(2).enumerate() {
            let dt = w[1] - w[0];
            if !((dt - period).abs() <= rel_tol * period) {
                return Err(PredictorError::NonUniformSampling {
                    index: i,
                    expected_ms: period,
                    found_ms: dt,
                });
            }
        }
        Ok(Self { t_ms, angles_deg })
    }

    pub fn len(&self) -> usize {
        self.t_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_ms.is_empty()
    }
}

pub fn predict(stream: &SampleStream, config: &PredictorConfig) -> Result<f64, PredictorError> {
    Predictor::new(*config)?.predict(&stream.angles_deg)
}
