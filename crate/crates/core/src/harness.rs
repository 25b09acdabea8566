//! Simulated adaptive 2IFC experiments.
//!
//! Each run presents a fixed initialization design, then picks every later
//! displacement by level-set straddle on the refit model, and finally traces
//! the threshold contour. Runs are fully determined by their seeds.
//!
//! During acquisition the model is refit after every trial with fixed kernel
//! hyperparameters. Marginal-likelihood tuning on nearly separable 2IFC data
//! drives the signal variance to its upper bound, which keeps the latent
//! variance high wherever `p ≈ 1`; straddle then chases those saturated
//! corners instead of the threshold. Only the final fit, which produces the
//! reported contour, tunes its hyperparameters.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normal;
use crate::threshold::{
    extract_contour, fit_gp, monotone_project_many, AxisLimits, ContourOptions, FitOptions, GpModel,
    Hyperparameters, NormalizedPoint, ThresholdContour, ThresholdError, TrialRecord,
};

pub const MAX_LAPSE: f64 = 0.1;
pub const LATTICE_SIDE: usize = 33;
const SUPRATHRESHOLD_R: f64 = 0.9;
const INNER_EXTENT: f64 = 0.4;
const STRADDLE_BETA: f64 = 1.96;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid observer: {0}")]
    InvalidObserver(String),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ThresholdError),
}

/// Ground-truth psychometric surface of a simulated observer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ObserverShape {
    /// `p = Φ((‖(x, z)‖ − a) / s)`.
    Circular { a_mm: f64, s_mm: f64 },
    /// `p = Φ((‖(x / kx, z / kz)‖ − a) / s)`.
    Elliptical { a_mm: f64, s_mm: f64, kx: f64, kz: f64 },
}

impl ObserverShape {
    pub fn p_correct(&self, x_mm: f64, z_mm: f64) -> f64 {
        let (rho, a, s) = match *self {
            ObserverShape::Circular { a_mm, s_mm } => (x_mm.hypot(z_mm), a_mm, s_mm),
            ObserverShape::Elliptical { a_mm, s_mm, kx, kz } => ((x_mm / kx).hypot(z_mm / kz), a_mm, s_mm),
        };
        normal::cdf((rho - a) / s)
    }

    /// Radius (circular) at which `p_correct` equals `p`.
    pub fn threshold_radius_mm(&self, p: f64) -> f64 {
        let (a, s) = match *self {
            ObserverShape::Circular { a_mm, s_mm } | ObserverShape::Elliptical { a_mm, s_mm, .. } => (a_mm, s_mm),
        };
        a + s * normal::quantile(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulatedObserver {
    pub shape: ObserverShape,
    pub lapse_rate: f64,
    pub seed: u64,
}

impl SimulatedObserver {
    pub fn new(shape: ObserverShape, lapse_rate: f64, seed: u64) -> Result<Self, HarnessError> {
        let (a, s, scales) = match shape {
            ObserverShape::Circular { a_mm, s_mm } => (a_mm, s_mm, (1.0, 1.0)),
            ObserverShape::Elliptical { a_mm, s_mm, kx, kz } => (a_mm, s_mm, (kx, kz)),
        };
        if !(a >= 0.0) || !a.is_finite() {
            return Err(HarnessError::InvalidObserver(format!("a must be non-negative, got {a}")));
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(HarnessError::InvalidObserver(format!("s must be positive, got {s}")));
        }
        if !(scales.0 > 0.0 && scales.1 > 0.0) {
            return Err(HarnessError::InvalidObserver("axis scales must be positive".into()));
        }
        if !(0.0..=MAX_LAPSE).contains(&lapse_rate) {
            return Err(HarnessError::InvalidObserver(format!(
                "lapse rate must lie in [0, {MAX_LAPSE}], got {lapse_rate}"
            )));
        }
        Ok(Self {
            shape,
            lapse_rate,
            seed,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Draws one response. A lapse inverts the outcome.
    pub fn respond<R: Rng>(&self, x_mm: f64, z_mm: f64, rng: &mut R) -> bool {
        let correct = rng.random::<f64>() < self.shape.p_correct(x_mm, z_mm);
        let lapse = self.lapse_rate > 0.0 && rng.random::<f64>() < self.lapse_rate;
        correct != lapse
    }
}

/// Parses `circular:a=8,s=2,lapse=0` or `elliptical:a=8,s=2,kx=1,kz=2,lapse=0`.
impl FromStr for SimulatedObserver {
    type Err = HarnessError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let (kind, params) = spec
            .split_once(':')
            .ok_or_else(|| HarnessError::InvalidObserver(format!("expected `shape:key=value,...`, got `{spec}`")))?;
        let mut a = None;
        let mut s = None;
        let mut kx = 1.0;
        let mut kz = 1.0;
        let mut lapse = 0.0;
        let mut seed = 0;
        for item in params.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| HarnessError::InvalidObserver(format!("malformed parameter `{item}`")))?;
            let num = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| HarnessError::InvalidObserver(format!("`{k}` is not a number: `{v}`")))
            };
            match k.trim() {
                "a" => a = Some(num(v)?),
                "s" => s = Some(num(v)?),
                "kx" => kx = num(v)?,
                "kz" => kz = num(v)?,
                "lapse" => lapse = num(v)?,
                "seed" => {
                    seed = v
                        .trim()
                        .parse()
                        .map_err(|_| HarnessError::InvalidObserver(format!("bad seed `{v}`")))?
                }
                other => return Err(HarnessError::InvalidObserver(format!("unknown parameter `{other}`"))),
            }
        }
        let a_mm = a.ok_or_else(|| HarnessError::InvalidObserver("missing `a`".into()))?;
        let s_mm = s.ok_or_else(|| HarnessError::InvalidObserver("missing `s`".into()))?;
        let shape = match kind.trim() {
            "circular" => {
                if kx != 1.0 || kz != 1.0 {
                    return Err(HarnessError::InvalidObserver("circular observers take no axis scales".into()));
                }
                ObserverShape::Circular { a_mm, s_mm }
            }
            "elliptical" => ObserverShape::Elliptical { a_mm, s_mm, kx, kz },
            other => return Err(HarnessError::InvalidObserver(format!("unknown observer shape `{other}`"))),
        };
        SimulatedObserver::new(shape, lapse, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub limits: AxisLimits,
    pub n_init: usize,
    pub budget: usize,
    pub p_target: f64,
    /// Seeds hyperparameter restarts of the final fit.
    pub seed: u64,
    /// Kernel used by the refits that drive acquisition.
    pub acquisition_hyper: Hyperparameters,
    /// Trial indices whose simulated response is forcibly inverted.
    pub flip_trials: Vec<usize>,
    pub subject: String,
    pub condition: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            limits: AxisLimits::ar(),
            n_init: 25,
            budget: 110,
            p_target: 0.75,
            seed: 0,
            acquisition_hyper: Hyperparameters::default(),
            flip_trials: Vec::new(),
            subject: "sim".into(),
            condition: "sim".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(25..=32).contains(&self.n_init) {
            return Err(HarnessError::InvalidConfig(format!(
                "n_init must lie in [25, 32], got {}",
                self.n_init
            )));
        }
        if self.n_init > self.budget {
            return Err(HarnessError::InvalidConfig(format!(
                "budget {} is smaller than n_init {}",
                self.budget, self.n_init
            )));
        }
        if !(self.p_target > 0.5 && self.p_target < 1.0) {
            return Err(HarnessError::InvalidConfig(format!(
                "p_target must lie in (0.5, 1), got {}",
                self.p_target
            )));
        }
        let h = self.acquisition_hyper;
        if ![h.lengthscale_x, h.lengthscale_z, h.signal_variance]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
        {
            return Err(HarnessError::InvalidConfig(format!(
                "acquisition hyperparameters must be positive, got {h:?}"
            )));
        }
        Ok(())
    }
}

/// Initialization displacements in millimetres: eight suprathreshold probes
/// on the axes and diagonals, then a fixed grid near the origin.
pub fn init_design(config: &ExperimentConfig) -> Vec<(f64, f64)> {
    let limits = &config.limits;
    let mut out: Vec<(f64, f64)> = (0..8)
        .map(|k| {
            let theta = k as f64 * std::f64::consts::FRAC_PI_4;
            limits.denormalize(&NormalizedPoint {
                r: SUPRATHRESHOLD_R,
                theta,
            })
        })
        .collect();

    let inner = config.n_init.saturating_sub(8);
    let side = (inner as f64).sqrt().ceil().max(2.0) as usize;
    let step = 2.0 * INNER_EXTENT / (side - 1) as f64;
    let mut grid: Vec<(f64, f64)> = (0..side)
        .flat_map(|j| (0..side).map(move |i| (-INNER_EXTENT + i as f64 * step, -INNER_EXTENT + j as f64 * step)))
        .collect();
    // Nearest to the origin first; ties by angle.
    grid.sort_by(|a, b| {
        let pa = NormalizedPoint::from_cartesian(a.0, a.1);
        let pb = NormalizedPoint::from_cartesian(b.0, b.1);
        let ra = (pa.r * 1e9).round();
        let rb = (pb.r * 1e9).round();
        ra.total_cmp(&rb).then(pa.theta.total_cmp(&pb.theta))
    });
    out.extend(grid.into_iter().take(inner).map(|(x, z)| limits.to_mm(x, z)));
    out
}

/// Straddle score: high where the latent is uncertain and near the target.
pub fn straddle_score(mu_hat: f64, sd_hat: f64, target_latent: f64) -> f64 {
    STRADDLE_BETA * sd_hat - (mu_hat - target_latent).abs()
}

/// Index of the highest score; the lowest index wins ties.
pub fn argmax_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

/// Normalized candidate lattice in row-major order (`z` outer, `x` inner).
pub fn candidate_lattice() -> Vec<(f64, f64)> {
    let step = 2.0 / (LATTICE_SIDE - 1) as f64;
    (0..LATTICE_SIDE)
        .flat_map(|j| (0..LATTICE_SIDE).map(move |i| (-1.0 + i as f64 * step, -1.0 + j as f64 * step)))
        .collect()
}

/// Next displacement (mm) by level-set straddle over the projected posterior.
pub fn acquire_next(model: &GpModel, config: &ExperimentConfig) -> (f64, f64) {
    let lattice = candidate_lattice();
    let queries: Vec<(f64, f64)> = lattice
        .iter()
        .map(|&(x, z)| {
            let p = NormalizedPoint::from_cartesian(x, z);
            (p.r, p.theta)
        })
        .collect();
    let target = normal::quantile(config.p_target);
    let scores: Vec<f64> = monotone_project_many(model, &queries, crate::threshold::DEFAULT_GRID)
        .iter()
        .map(|p| straddle_score(p.mu_hat, p.sd_hat, target))
        .collect();
    let best = argmax_first(&scores).expect("lattice is non-empty");
    config.limits.to_mm(lattice[best].0, lattice[best].1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Init,
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedTrial {
    pub trial: TrialRecord,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentLog {
    pub trials: Vec<LoggedTrial>,
}

impl ExperimentLog {
    pub fn records(&self) -> Vec<TrialRecord> {
        self.trials.iter().map(|t| t.trial.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub log: ExperimentLog,
    /// `Err(FullyCensored)` is a flagged outcome, not a failure of the run.
    pub contour: Result<ThresholdContour, ThresholdError>,
    pub model: GpModel,
}

impl ExperimentResult {
    /// The contour, including a partial one for a fully censored outcome.
    pub fn contour_or_partial(&self) -> Option<&ThresholdContour> {
        match &self.contour {
            Ok(c) => Some(c),
            Err(ThresholdError::FullyCensored { partial, .. }) => Some(partial),
            Err(_) => None,
        }
    }
}

pub fn run_experiment(observer: &SimulatedObserver, config: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(observer.seed);
    let init = init_design(config);
    let mut log = ExperimentLog::default();
    let mut records: Vec<TrialRecord> = Vec::with_capacity(config.budget);
    let mut model = GpModel::prior(config.acquisition_hyper);

    for i in 0..config.budget {
        let (phase, (x, z)) = match init.get(i) {
            Some(&p) => (Phase::Init, p),
            None => (Phase::Adaptive, acquire_next(&model, config)),
        };
        let mut correct = observer.respond(x, z, &mut rng);
        if config.flip_trials.contains(&i) {
            correct = !correct;
        }
        let record = TrialRecord::new(&config.subject, &config.condition, x, z, correct);
        records.push(record.clone());
        log.trials.push(LoggedTrial { trial: record, phase });

        // The last refit is superseded by the tuned fit below.
        if i + 1 >= config.n_init && i + 1 < config.budget {
            model = fit_gp(&records, &config.limits, &FitOptions::fixed(config.acquisition_hyper))?;
        }
    }

    let model = fit_gp(
        &records,
        &config.limits,
        &FitOptions {
            seed: config.seed,
            ..FitOptions::default()
        },
    )?;
    let contour = extract_contour(
        &model,
        &config.limits,
        &ContourOptions {
            p_target: config.p_target,
            ..ContourOptions::default()
        },
    );
    match contour {
        Ok(_) | Err(ThresholdError::FullyCensored { .. }) => {}
        Err(e) => return Err(e.into()),
    }
    Ok(ExperimentResult { log, contour, model })
}
