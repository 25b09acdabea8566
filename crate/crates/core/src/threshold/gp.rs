//! Probit Gaussian-process classifier with a Laplace posterior.

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AxisLimits, LatentSurface, ThresholdError, TrialRecord};
use crate::normal;

const JITTER: f64 = 1e-8;
const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITERS: usize = 100;

/// Squared-exponential kernel parameters over normalized `(x, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub lengthscale_x: f64,
    pub lengthscale_z: f64,
    pub signal_variance: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            lengthscale_x: 0.3,
            lengthscale_z: 0.3,
            signal_variance: 4.0,
        }
    }
}

pub const LENGTHSCALE_BOUNDS: (f64, f64) = (0.05, 2.0);
pub const VARIANCE_BOUNDS: (f64, f64) = (0.25, 25.0);

impl Hyperparameters {
    fn to_log(self) -> [f64; 3] {
        [
            self.lengthscale_x.ln(),
            self.lengthscale_z.ln(),
            self.signal_variance.ln(),
        ]
    }

    fn from_log(p: &[f64; 3]) -> Self {
        let clamp = |v: f64, (lo, hi): (f64, f64)| v.exp().clamp(lo, hi);
        Self {
            lengthscale_x: clamp(p[0], LENGTHSCALE_BOUNDS),
            lengthscale_z: clamp(p[1], LENGTHSCALE_BOUNDS),
            signal_variance: clamp(p[2], VARIANCE_BOUNDS),
        }
    }

    fn log_bounds() -> [(f64, f64); 3] {
        let l = (LENGTHSCALE_BOUNDS.0.ln(), LENGTHSCALE_BOUNDS.1.ln());
        [l, l, (VARIANCE_BOUNDS.0.ln(), VARIANCE_BOUNDS.1.ln())]
    }

    pub fn kernel(&self, a: &[f64; 2], b: &[f64; 2]) -> f64 {
        let dx = (a[0] - b[0]) / self.lengthscale_x;
        let dz = (a[1] - b[1]) / self.lengthscale_z;
        self.signal_variance * (-0.5 * (dx * dx + dz * dz)).exp()
    }
}

/// How `fit_gp` chooses hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub initial: Hyperparameters,
    /// Maximize the Laplace marginal likelihood; otherwise use `initial` as is.
    pub optimize: bool,
    /// Random restarts in addition to the start at `initial`.
    pub restarts: usize,
    pub max_evaluations: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            initial: Hyperparameters::default(),
            optimize: true,
            restarts: 2,
            max_evaluations: 120,
            seed: 0,
        }
    }
}

impl FitOptions {
    pub fn fixed(hyper: Hyperparameters) -> Self {
        Self {
            initial: hyper,
            optimize: false,
            ..Self::default()
        }
    }
}

/// Laplace-approximated posterior over the latent detection function.
#[derive(Debug, Clone)]
pub struct GpModel {
    hyper: Hyperparameters,
    inputs: Vec<[f64; 2]>,
    targets: Vec<f64>,
    mode: DVector<f64>,
    /// Gradient of the log likelihood at the mode.
    grad: DVector<f64>,
    sqrt_w: DVector<f64>,
    chol_b: Option<Cholesky<f64, Dyn>>,
    /// `W½ B⁻¹ W½`, built on first prediction.
    var_reduction: OnceLock<DMatrix<f64>>,
    log_marginal: f64,
}

impl GpModel {
    /// Model with no observations: the prior.
    pub fn prior(hyper: Hyperparameters) -> Self {
        Self {
            hyper,
            inputs: Vec::new(),
            targets: Vec::new(),
            mode: DVector::zeros(0),
            grad: DVector::zeros(0),
            sqrt_w: DVector::zeros(0),
            chol_b: None,
            var_reduction: OnceLock::new(),
            log_marginal: 0.0,
        }
    }

    /// Finds the posterior mode for fixed hyperparameters. `targets` are ±1.
    pub fn fit(inputs: Vec<[f64; 2]>, targets: Vec<f64>, hyper: Hyperparameters) -> Result<Self, ThresholdError> {
        assert_eq!(inputs.len(), targets.len());
        let n = inputs.len();
        if n == 0 {
            return Ok(Self::prior(hyper));
        }
        let mut k = DMatrix::from_fn(n, n, |i, j| hyper.kernel(&inputs[i], &inputs[j]));
        for i in 0..n {
            k[(i, i)] += JITTER;
        }
        let y = DVector::from_vec(targets);

        let mut f = DVector::zeros(n);
        let mut a = DVector::zeros(n);
        let mut psi = objective(&a, &f, &y);
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITERS {
            let (grad, w) = likelihood_derivs(&f, &y);
            let sw = w.map(f64::sqrt);
            let chol = factor_b(&k, &sw)?;
            let b = w.component_mul(&f) + &grad;
            let kb = &k * &b;
            let inner = chol.solve(&sw.component_mul(&kb));
            let a_new = &b - sw.component_mul(&inner);

            // Damped step along a; the objective is concave in f.
            let mut step = 1.0;
            let (mut a_try, mut f_try, mut psi_try);
            loop {
                a_try = &a + (&a_new - &a) * step;
                f_try = &k * &a_try;
                psi_try = objective(&a_try, &f_try, &y);
                if psi_try >= psi - 1e-12 || step < 1e-6 {
                    break;
                }
                step /= 2.0;
            }
            let delta = psi_try - psi;
            a = a_try;
            f = f_try;
            psi = psi_try;
            if delta.abs() < NEWTON_TOL {
                converged = true;
                break;
            }
        }
        if !converged || !psi.is_finite() {
            return Err(ThresholdError::NotConverged);
        }

        let (grad, w) = likelihood_derivs(&f, &y);
        let sw = w.map(f64::sqrt);
        let chol = factor_b(&k, &sw)?;
        let log_det_half: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
        let log_marginal = psi - log_det_half;

        Ok(Self {
            hyper,
            inputs,
            targets: y.iter().copied().collect(),
            mode: f,
            grad,
            sqrt_w: sw,
            chol_b: Some(chol),
            var_reduction: OnceLock::new(),
            log_marginal,
        })
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        self.hyper
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_marginal
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[[f64; 2]] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Latent posterior mode at the training inputs.
    pub fn mode(&self) -> &DVector<f64> {
        &self.mode
    }

    fn predict_many(&self, queries: &[[f64; 2]]) -> Vec<(f64, f64)> {
        let prior_var = self.hyper.signal_variance;
        let Some(chol) = &self.chol_b else {
            return vec![(0.0, prior_var); queries.len()];
        };
        let n = self.inputs.len();
        let q = queries.len();
        let reduction = self.var_reduction.get_or_init(|| {
            let mut m = chol.inverse();
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] *= self.sqrt_w[i] * self.sqrt_w[j];
                }
            }
            m
        });
        let kstar = DMatrix::from_fn(n, q, |i, j| self.hyper.kernel(&self.inputs[i], &queries[j]));
        let mu = kstar.tr_mul(&self.grad);
        let ak = reduction * &kstar;
        (0..q)
            .map(|j| {
                let r = kstar.column(j).dot(&ak.column(j));
                (mu[j], (prior_var - r).max(0.0))
            })
            .collect()
    }
}

impl GpModel {
    /// Inverse squared lengthscales.
    fn inv_sq_lengthscales(&self) -> (f64, f64) {
        let h = self.hyper;
        (1.0 / (h.lengthscale_x * h.lengthscale_x), 1.0 / (h.lengthscale_z * h.lengthscale_z))
    }

    fn predict_means(&self, queries: &[[f64; 2]]) -> Vec<f64> {
        if self.chol_b.is_none() {
            return vec![0.0; queries.len()];
        }
        let (ix, iz) = self.inv_sq_lengthscales();
        let s2 = self.hyper.signal_variance;
        queries
            .iter()
            .map(|q| {
                let sum: f64 = self
                    .inputs
                    .iter()
                    .zip(self.grad.iter())
                    .map(|(x, g)| {
                        let dx = q[0] - x[0];
                        let dz = q[1] - x[1];
                        g * (-0.5 * (dx * dx * ix + dz * dz * iz)).exp()
                    })
                    .sum();
                s2 * sum
            })
            .collect()
    }

    fn predict_mean_ray_derivs(&self, points: &[[f64; 2]], dirs: &[[f64; 2]]) -> Vec<[f64; 3]> {
        if self.chol_b.is_none() {
            return vec![[0.0; 3]; points.len()];
        }
        let (ix, iz) = self.inv_sq_lengthscales();
        let s2 = self.hyper.signal_variance;
        points
            .iter()
            .zip(dirs)
            .map(|(q, u)| {
                let curv = u[0] * u[0] * ix + u[1] * u[1] * iz;
                let mut acc = [0.0; 3];
                for (x, g) in self.inputs.iter().zip(self.grad.iter()) {
                    let dx = q[0] - x[0];
                    let dz = q[1] - x[1];
                    let k = g * (-0.5 * (dx * dx * ix + dz * dz * iz)).exp();
                    let slope = -(u[0] * dx * ix + u[1] * dz * iz);
                    acc[0] += k;
                    acc[1] += k * slope;
                    acc[2] += k * (slope * slope - curv);
                }
                acc.map(|v| s2 * v)
            })
            .collect()
    }
}

impl LatentSurface for GpModel {
    fn latent(&self, x: f64, z: f64) -> (f64, f64) {
        self.predict_many(&[[x, z]])[0]
    }

    fn latent_batch(&self, points: &[[f64; 2]]) -> Vec<(f64, f64)> {
        // Bounded chunks keep the cross-covariance matrix small.
        points
            .chunks(4096)
            .flat_map(|c| self.predict_many(c))
            .collect()
    }

    fn latent_mean_batch(&self, points: &[[f64; 2]]) -> Vec<f64> {
        self.predict_means(points)
    }

    fn latent_mean_ray_derivs(&self, points: &[[f64; 2]], dirs: &[[f64; 2]]) -> Vec<[f64; 3]> {
        self.predict_mean_ray_derivs(points, dirs)
    }

    fn radial_step(&self) -> f64 {
        let h = self.hyper;
        (h.lengthscale_x.min(h.lengthscale_z) / 4.0).clamp(0.0125, 0.05)
    }
}

fn objective(a: &DVector<f64>, f: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let ll: f64 = f.iter().zip(y.iter()).map(|(fi, yi)| normal::log_cdf(yi * fi)).sum();
    -0.5 * a.dot(f) + ll
}

/// Gradient and negative Hessian diagonal of the probit log likelihood.
fn likelihood_derivs(f: &DVector<f64>, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let n = f.len();
    let mut grad = DVector::zeros(n);
    let mut w = DVector::zeros(n);
    for i in 0..n {
        let z = y[i] * f[i];
        let ratio = normal::pdf_over_cdf(z);
        grad[i] = y[i] * ratio;
        w[i] = ratio * ratio + z * ratio;
    }
    (grad, w)
}

fn factor_b(k: &DMatrix<f64>, sw: &DVector<f64>) -> Result<Cholesky<f64, Dyn>, ThresholdError> {
    let n = k.nrows();
    let b = DMatrix::from_fn(n, n, |i, j| {
        let v = sw[i] * k[(i, j)] * sw[j];
        if i == j {
            1.0 + v
        } else {
            v
        }
    });
    Cholesky::new(b).ok_or(ThresholdError::SingularKernel)
}

/// Canonical ordering so a fit does not depend on trial order.
fn canonical_data(trials: &[TrialRecord], limits: &AxisLimits) -> (Vec<[f64; 2]>, Vec<f64>) {
    let mut rows: Vec<([f64; 2], f64)> = trials
        .iter()
        .map(|t| {
            let (x, z) = limits.to_normalized(t.x_err_mm, t.z_err_mm);
            ([x, z], if t.correct { 1.0 } else { -1.0 })
        })
        .collect();
    rows.sort_by(|a, b| {
        a.0[0]
            .total_cmp(&b.0[0])
            .then(a.0[1].total_cmp(&b.0[1]))
            .then(a.1.total_cmp(&b.1))
    });
    rows.into_iter().unzip()
}

/// Fits the probit GP to trials, optionally maximizing the approximate
/// marginal likelihood over kernel hyperparameters.
pub fn fit_gp(trials: &[TrialRecord], limits: &AxisLimits, options: &FitOptions) -> Result<GpModel, ThresholdError> {
    if let Some(t) = trials.iter().find(|t| !t.x_err_mm.is_finite() || !t.z_err_mm.is_finite()) {
        return Err(ThresholdError::InvalidInput(format!(
            "non-finite displacement ({}, {})",
            t.x_err_mm, t.z_err_mm
        )));
    }
    let (inputs, targets) = canonical_data(trials, limits);
    if inputs.is_empty() {
        return Ok(GpModel::prior(options.initial));
    }
    if !options.optimize {
        return GpModel::fit(inputs, targets, options.initial);
    }

    let eval = |p: &[f64; 3]| -> f64 {
        match GpModel::fit(inputs.clone(), targets.clone(), Hyperparameters::from_log(p)) {
            Ok(m) => -m.log_marginal_likelihood(),
            Err(_) => f64::INFINITY,
        }
    };

    let bounds = Hyperparameters::log_bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut starts = vec![options.initial.to_log()];
    for _ in 0..options.restarts {
        starts.push(bounds.map(|(lo, hi)| rng.random_range(lo..hi)));
    }

    let mut best: Option<([f64; 3], f64)> = None;
    for start in starts {
        let (p, v) = nelder_mead(&eval, start, &bounds, options.max_evaluations);
        if v.is_finite() && best.is_none_or(|(_, bv)| v < bv) {
            best = Some((p, v));
        }
    }
    let hyper = match best {
        Some((p, _)) => Hyperparameters::from_log(&p),
        None => options.initial,
    };
    GpModel::fit(inputs.clone(), targets.clone(), hyper).or_else(|_| GpModel::fit(inputs, targets, options.initial))
}

/// Box-constrained Nelder-Mead minimization (points are clamped into bounds).
fn nelder_mead<F: Fn(&[f64; 3]) -> f64>(
    f: &F,
    start: [f64; 3],
    bounds: &[(f64, f64); 3],
    max_evals: usize,
) -> ([f64; 3], f64) {
    let clamp = |mut p: [f64; 3]| {
        for (v, (lo, hi)) in p.iter_mut().zip(bounds) {
            *v = v.clamp(*lo, *hi);
        }
        p
    };
    let start = clamp(start);
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    let mut evals = 0;
    let eval = |p: [f64; 3], evals: &mut usize| {
        *evals += 1;
        (p, f(&p))
    };
    simplex.push(eval(start, &mut evals));
    for d in 0..3 {
        let mut p = start;
        let span = bounds[d].1 - bounds[d].0;
        p[d] += if p[d] + 0.15 * span <= bounds[d].1 { 0.15 } else { -0.15 } * span;
        simplex.push(eval(clamp(p), &mut evals));
    }

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[3].1 - simplex[0].1;
        if spread.is_finite() && spread.abs() < 1e-7 {
            break;
        }
        let mut centroid = [0.0; 3];
        for (p, _) in &simplex[..3] {
            for d in 0..3 {
                centroid[d] += p[d] / 3.0;
            }
        }
        let along = |t: f64| {
            let worst = simplex[3].0;
            clamp([0, 1, 2].map(|d| centroid[d] + t * (worst[d] - centroid[d])))
        };
        let reflected = eval(along(-1.0), &mut evals);
        if reflected.1 < simplex[0].1 {
            let expanded = eval(along(-2.0), &mut evals);
            simplex[3] = if expanded.1 < reflected.1 { expanded } else { reflected };
        } else if reflected.1 < simplex[2].1 {
            simplex[3] = reflected;
        } else {
            let t = if reflected.1 < simplex[3].1 { -0.5 } else { 0.5 };
            let contracted = eval(along(t), &mut evals);
            if contracted.1 < simplex[3].1.min(reflected.1) {
                simplex[3] = contracted;
            } else {
                let best = simplex[0].0;
                for item in simplex.iter_mut().skip(1) {
                    let p = [0, 1, 2].map(|d| best[d] + 0.5 * (item.0[d] - best[d]));
                    *item = eval(clamp(p), &mut evals);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}
