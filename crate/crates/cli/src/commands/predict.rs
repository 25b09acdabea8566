//! `predict`: forward prediction of an encoder head-angle stream.

use std::path::PathBuf;

use clap::Args;
use wlr_core::predictor::{Predictor, PredictorConfig, SampleStream};

use crate::error::{CliError, Result};
use crate::formats::{csv_text, opt, parse_f64, read_csv_rows, write_bytes};
use crate::Common;

pub const ENCODER_HEADER: [&str; 2] = ["t_ms", "angle_deg"];
pub const PREDICTION_HEADER: [&str; 4] = ["t_ms", "angle_deg", "target_t_ms", "predicted_angle_deg"];
/// Relative timestamp jitter tolerated before sampling counts as non-uniform.
pub const UNIFORM_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// CSV with header `t_ms,angle_deg`.
    #[arg(long)]
    pub input: PathBuf,
    /// Sample rate in Hz; inferred from the first interval when omitted.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Odd filter window length in samples.
    #[arg(long, default_value_t = 51)]
    pub window: usize,
    #[arg(long, default_value_t = 26.0)]
    pub horizon_ms: f64,
}

pub struct Prediction {
    pub t_ms: f64,
    pub angle_deg: f64,
    /// `None` until the window has filled.
    pub predicted_deg: Option<f64>,
}

pub fn run(args: &PredictArgs, common: &Common) -> Result<Vec<Prediction>> {
    let path = &args.input;
    let mut t_ms = Vec::new();
    let mut angles = Vec::new();
    for (line, r) in read_csv_rows(path, &ENCODER_HEADER)? {
        t_ms.push(parse_f64(path, line, "t_ms", &r[0])?);
        angles.push(parse_f64(path, line, "angle_deg", &r[1])?);
    }
    let sample_rate_hz = match args.rate {
        Some(rate) => rate,
        None if t_ms.len() >= 2 && t_ms[1] > t_ms[0] => 1000.0 / (t_ms[1] - t_ms[0]),
        None => {
            return Err(CliError::Config(
                "cannot infer the sample rate; pass --rate or give increasing timestamps".into(),
            ))
        }
    };
    let config = PredictorConfig {
        sample_rate_hz,
        window_samples: args.window,
        horizon_ms: args.horizon_ms,
    };
    let predictor = Predictor::new(config)?;
    let stream = SampleStream::new(t_ms, angles, sample_rate_hz, UNIFORM_REL_TOL)?;
    let predictions: Vec<Prediction> = predictor
        .predict_stream(&stream)
        .into_iter()
        .zip(stream.t_ms.iter().zip(&stream.angles_deg))
        .map(|(p, (&t, &a))| Prediction {
            t_ms: t,
            angle_deg: a,
            predicted_deg: p,
        })
        .collect();

    let rows = predictions.iter().map(|p| {
        [
            p.t_ms.to_string(),
            p.angle_deg.to_string(),
            (p.t_ms + args.horizon_ms).to_string(),
            opt(p.predicted_deg),
        ]
    });
    write_bytes(&common.out.join("predictions.csv"), &csv_text(&PREDICTION_HEADER, rows))?;
    let filled = predictions.iter().filter(|p| p.predicted_deg.is_some()).count();
    println!("{} samples at {sample_rate_hz} Hz, {filled} predictions", predictions.len());
    Ok(predictions)
}
