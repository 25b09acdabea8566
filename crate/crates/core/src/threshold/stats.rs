use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::ThresholdError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedTTest {
    pub t: f64,
    pub df: f64,
    pub p_two_sided: f64,
    pub mean_difference: f64,
}

/// Two-sided paired t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTTest, ThresholdError> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(ThresholdError::InvalidInput(format!(
            "paired samples need equal lengths of at least 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Err(ThresholdError::DegenerateVariance);
    }
    let t = mean / (var / n).sqrt();
    let df = n - 1.0;
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| ThresholdError::InvalidInput(e.to_string()))?;
    let p = 2.0 * dist.cdf(-t.abs());
    Ok(PairedTTest {
        t,
        df,
        p_two_sided: p.min(1.0),
        mean_difference: mean,
    })
}
