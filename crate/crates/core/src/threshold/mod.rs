//! Detection-threshold contours from 2IFC trials.
//!
//! Displacements are normalized per axis by the condition's search limits,
//! a probit GP is fit over the normalized plane, and the posterior is made
//! monotone along rays from the origin before the iso-probability contour
//! is traced.

mod contour;
mod gp;
mod projection;
mod stats;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use contour::{
    extract_contour, polygon_area_centroid, threshold_radius, ContourOptions, ThresholdContour, ThresholdCrossing,
    FULLY_CENSORED_FRACTION,
};
pub use gp::{fit_gp, FitOptions, GpModel, Hyperparameters, LENGTHSCALE_BOUNDS, VARIANCE_BOUNDS};
pub use projection::{detect_prob, monotone_project, monotone_project_many, ProjectedPosterior, DEFAULT_GRID};
pub use stats::{paired_t_test, PairedTTest};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThresholdError {
    #[error("kernel matrix is not positive definite even with jitter")]
    SingularKernel,
    #[error("Laplace mode search did not converge")]
    NotConverged,
    #[error("{censored} of {total} angles have no threshold inside the limits")]
    FullyCensored {
        censored: usize,
        total: usize,
        partial: Box<ThresholdContour>,
    },
    #[error("differences have zero variance")]
    DegenerateVariance,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// One 2IFC response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub subject: String,
    pub condition: String,
    pub x_err_mm: f64,
    pub z_err_mm: f64,
    pub correct: bool,
}

impl TrialRecord {
    pub fn new(subject: &str, condition: &str, x_err_mm: f64, z_err_mm: f64, correct: bool) -> Self {
        Self {
            subject: subject.to_string(),
            condition: condition.to_string(),
            x_err_mm,
            z_err_mm,
            correct,
        }
    }
}

/// Per-axis search limits in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisLimits {
    pub x_mm: f64,
    pub z_mm: f64,
}

impl AxisLimits {
    pub fn new(x_mm: f64, z_mm: f64) -> Result<Self, ThresholdError> {
        if !(x_mm > 0.0 && z_mm > 0.0) || !x_mm.is_finite() || !z_mm.is_finite() {
            return Err(ThresholdError::InvalidInput(format!(
                "axis limits must be positive, got ({x_mm}, {z_mm})"
            )));
        }
        Ok(Self { x_mm, z_mm })
    }

    /// AR search limits.
    pub fn ar() -> Self {
        Self { x_mm: 15.0, z_mm: 15.0 }
    }

    /// VR search limits (lateral, eye relief).
    pub fn vr() -> Self {
        Self { x_mm: 60.0, z_mm: 100.0 }
    }

    pub fn to_normalized(&self, x_mm: f64, z_mm: f64) -> (f64, f64) {
        (x_mm / self.x_mm, z_mm / self.z_mm)
    }

    pub fn to_mm(&self, x: f64, z: f64) -> (f64, f64) {
        (x * self.x_mm, z * self.z_mm)
    }

    pub fn normalize(&self, x_mm: f64, z_mm: f64) -> NormalizedPoint {
        let (x, z) = self.to_normalized(x_mm, z_mm);
        NormalizedPoint::from_cartesian(x, z)
    }

    pub fn denormalize(&self, p: &NormalizedPoint) -> (f64, f64) {
        let (x, z) = p.to_cartesian();
        self.to_mm(x, z)
    }
}

/// Polar form of a limit-normalized displacement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedPoint {
    pub r: f64,
    /// In `[0, 2π)`; zero at the origin.
    pub theta: f64,
}

impl NormalizedPoint {
    pub fn from_cartesian(x: f64, z: f64) -> Self {
        let r = x.hypot(z);
        if r == 0.0 {
            return Self { r: 0.0, theta: 0.0 };
        }
        let mut theta = z.atan2(x);
        if theta < 0.0 {
            theta += TAU;
        }
        if theta >= TAU {
            theta -= TAU;
        }
        Self { r, theta }
    }

    pub fn to_cartesian(&self) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.r * c, self.r * s)
    }
}

pub fn normalize(trials: &[TrialRecord], limits: &AxisLimits) -> Vec<NormalizedPoint> {
    trials.iter().map(|t| limits.normalize(t.x_err_mm, t.z_err_mm)).collect()
}

/// Largest normalized radius along `theta` that stays inside the limit box.
pub fn max_radius(theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    1.0 / c.abs().max(s.abs())
}

/// A Gaussian posterior over the latent function at normalized `(x, z)`.
pub trait LatentSurface {
    /// Posterior mean and variance.
    fn latent(&self, x: f64, z: f64) -> (f64, f64);

    fn latent_batch(&self, points: &[[f64; 2]]) -> Vec<(f64, f64)> {
        points.iter().map(|p| self.latent(p[0], p[1])).collect()
    }

    /// Posterior means only; surfaces with a cheaper mean should override this.
    fn latent_mean_batch(&self, points: &[[f64; 2]]) -> Vec<f64> {
        self.latent_batch(points).into_iter().map(|(mu, _)| mu).collect()
    }

    /// Mean and its first and second derivatives along the unit direction
    /// `dirs[i]` at `points[i]`. The default uses central differences.
    fn latent_mean_ray_derivs(&self, points: &[[f64; 2]], dirs: &[[f64; 2]]) -> Vec<[f64; 3]> {
        const H: f64 = 1e-4;
        let pts: Vec<[f64; 2]> = points
            .iter()
            .zip(dirs)
            .flat_map(|(p, d)| [-H, 0.0, H].map(|t| [p[0] + t * d[0], p[1] + t * d[1]]))
            .collect();
        self.latent_mean_batch(&pts)
            .chunks(3)
            .map(|m| [m[1], (m[2] - m[0]) / (2.0 * H), (m[2] - 2.0 * m[1] + m[0]) / (H * H)])
            .collect()
    }

    /// Radial spacing (normalized units) fine enough that the mean has at most
    /// one local maximum within any two adjacent steps.
    fn radial_step(&self) -> f64 {
        0.01
    }
}

impl<F: Fn(f64, f64) -> (f64, f64)> LatentSurface for F {
    fn latent(&self, x: f64, z: f64) -> (f64, f64) {
        self(x, z)
    }
}
