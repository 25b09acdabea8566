//! Standard normal helpers with stable lower tails.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

pub fn cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

pub fn log_cdf(z: f64) -> f64 {
    if z > -30.0 {
        cdf(z).ln()
    } else {
        // Asymptotic series for the far lower tail.
        let z2 = z * z;
        -0.5 * z2 - LN_SQRT_2PI - (-z).ln() + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    }
}

/// `pdf(z) / cdf(z)`, finite for all `z`.
pub fn pdf_over_cdf(z: f64) -> f64 {
    if z > -30.0 {
        pdf(z) / cdf(z)
    } else {
        let z2 = z * z;
        -z / (1.0 - 1.0 / z2 + 3.0 / (z2 * z2))
    }
}

pub fn quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}
