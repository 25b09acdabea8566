//! Radial monotone projection of a latent posterior.
//!
//! The posterior at `(r, θ)` is replaced by a Gaussian whose mean is the
//! supremum of the posterior mean on the ray segment `[0, r]` and whose
//! spread comes from the largest lower and upper two-sigma bounds sampled at
//! `r·i/m, i = 0..=m`.
//!
//! The supremum is taken over a radial grid with a fixed absolute step (so
//! the sample set for `r` is a prefix of the one for any `r' > r`), the query
//! itself, and a safeguarded Newton refinement around every local maximum
//! of those samples. That keeps `μ̂` non-decreasing in `r` and `μ̂ ≥ μ`.

use serde::Serialize;

use super::LatentSurface;
use crate::normal;

pub const DEFAULT_GRID: usize = 20;

const NEWTON_MAX_ITERS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectedPosterior {
    pub mu_hat: f64,
    pub sd_hat: f64,
    pub lower: f64,
    pub upper: f64,
    /// Unprojected posterior mean at the query itself.
    pub mu: f64,
}

fn point_on_ray(r: f64, cos_sin: (f64, f64)) -> [f64; 2] {
    [r * cos_sin.0, r * cos_sin.1]
}

/// Radii of the absolute mean grid on `[0, r)`, followed by `r` itself.
fn mean_radii(r: f64, step: f64) -> Vec<f64> {
    let k_max = (r / step).floor() as usize;
    let mut radii: Vec<f64> = (0..=k_max).map(|k| k as f64 * step).filter(|&p| p < r).collect();
    radii.push(r);
    radii
}

/// Interval `[a, b]` on one ray that may hold an interior maximum of the mean.
struct Bracket {
    query: usize,
    dir: [f64; 2],
    a: f64,
    b: f64,
    x: f64,
    best: f64,
    done: bool,
}

pub fn monotone_project<S: LatentSurface + ?Sized>(surface: &S, r: f64, theta: f64, m: usize) -> ProjectedPosterior {
    monotone_project_many(surface, &[(r, theta)], m)[0]
}

/// Projects many `(r, θ)` queries with batched surface evaluations.
pub fn monotone_project_many<S: LatentSurface + ?Sized>(
    surface: &S,
    queries: &[(f64, f64)],
    m: usize,
) -> Vec<ProjectedPosterior> {
    assert!(m >= 1, "projection grid needs at least one interval");
    assert!(
        queries.iter().all(|q| q.0 >= 0.0 && q.0.is_finite()),
        "radius must be finite and non-negative"
    );
    let step = surface.radial_step();
    let rays: Vec<(f64, f64)> = queries.iter().map(|q| (q.1.cos(), q.1.sin())).collect();

    // Spread: relative grid with mean and variance.
    let mut pts = Vec::with_capacity(queries.len() * (m + 1));
    for (&(r, _), &cs) in queries.iter().zip(&rays) {
        pts.extend((0..=m).map(|i| point_on_ray(r * i as f64 / m as f64, cs)));
    }
    let spread: Vec<(f64, f64)> = surface
        .latent_batch(&pts)
        .chunks(m + 1)
        .map(|samples| {
            samples.iter().fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |(lo, hi), &(mu, var)| {
                let sd = var.max(0.0).sqrt();
                (lo.max(mu - 2.0 * sd), hi.max(mu + 2.0 * sd))
            })
        })
        .collect();

    // Mean supremum: absolute grid plus the query point.
    let radii: Vec<Vec<f64>> = queries.iter().map(|q| mean_radii(q.0, step)).collect();
    let mut pts = Vec::with_capacity(radii.iter().map(Vec::len).sum());
    for (rs, &cs) in radii.iter().zip(&rays) {
        pts.extend(rs.iter().map(|&p| point_on_ray(p, cs)));
    }
    let means = surface.latent_mean_batch(&pts);

    let mut out = Vec::with_capacity(queries.len());
    let mut brackets = Vec::new();
    let mut offset = 0;
    for (q, rs) in radii.iter().enumerate() {
        let v = &means[offset..offset + rs.len()];
        offset += rs.len();
        let last = rs.len() - 1;
        for j in 0..rs.len() {
            let left_ok = j == 0 || v[j] >= v[j - 1];
            let right_ok = j == last || v[j] >= v[j + 1];
            if !(left_ok && right_ok) || last == 0 {
                continue;
            }
            let a = rs[j.saturating_sub(1)];
            let b = rs[(j + 1).min(last)];
            brackets.push(Bracket {
                query: q,
                dir: [rays[q].0, rays[q].1],
                a,
                b,
                x: rs[j],
                best: f64::NEG_INFINITY,
                done: false,
            });
        }
        let (lower, upper) = spread[q];
        out.push(ProjectedPosterior {
            mu_hat: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            sd_hat: ((upper - lower) / 4.0).max(0.0),
            lower,
            upper,
            mu: v[last],
        });
    }

    if !brackets.is_empty() {
        refine(surface, &mut brackets);
        for br in &brackets {
            let p = &mut out[br.query];
            p.mu_hat = p.mu_hat.max(br.best);
        }
    }
    out
}

/// Batched safeguarded Newton search for a zero of the radial slope inside
/// each bracket, recording the best mean seen.
fn refine<S: LatentSurface + ?Sized>(surface: &S, brackets: &mut Vec<Bracket>) {
    let at = |br: &Bracket, r: f64| [r * br.dir[0], r * br.dir[1]];
    // A maximum strictly inside needs a rising start and a falling end.
    let ends: Vec<[f64; 2]> = brackets.iter().flat_map(|br| [at(br, br.a), at(br, br.b)]).collect();
    let dirs: Vec<[f64; 2]> = brackets.iter().flat_map(|br| [br.dir, br.dir]).collect();
    let slopes = surface.latent_mean_ray_derivs(&ends, &dirs);
    for (br, s) in brackets.iter_mut().zip(slopes.chunks(2)) {
        br.done = !(s[0][1] > 0.0 && s[1][1] < 0.0);
        if !(br.x > br.a && br.x < br.b) {
            br.x = 0.5 * (br.a + br.b);
        }
    }
    brackets.retain(|br| !br.done);

    for _ in 0..NEWTON_MAX_ITERS {
        let active: Vec<usize> = (0..brackets.len()).filter(|&i| !brackets[i].done).collect();
        if active.is_empty() {
            break;
        }
        let pts: Vec<[f64; 2]> = active.iter().map(|&i| at(&brackets[i], brackets[i].x)).collect();
        let dirs: Vec<[f64; 2]> = active.iter().map(|&i| brackets[i].dir).collect();
        let derivs = surface.latent_mean_ray_derivs(&pts, &dirs);
        for (&i, [mu, d1, d2]) in active.iter().zip(derivs) {
            let br = &mut brackets[i];
            br.best = br.best.max(mu);
            if d1 > 0.0 {
                br.a = br.x;
            } else {
                br.b = br.x;
            }
            let newton = br.x - d1 / d2;
            let next = if d2 < 0.0 && newton > br.a && newton < br.b {
                newton
            } else {
                0.5 * (br.a + br.b)
            };
            let tol = 1e-13 * (1.0 + br.x.abs());
            br.done = d1 == 0.0 || (next - br.x).abs() <= tol || br.b - br.a <= tol;
            br.x = next;
        }
    }
}

/// Posterior-median detection probability `Φ(μ̂)` of the projected latent.
pub fn detect_prob(proj: &ProjectedPosterior) -> f64 {
    normal::cdf(proj.mu_hat)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn posterior(mu_hat: f64, sd_hat: f64) -> ProjectedPosterior {
        ProjectedPosterior {
            mu_hat,
            sd_hat,
            lower: mu_hat - 2.0 * sd_hat,
            upper: mu_hat + 2.0 * sd_hat,
            mu: mu_hat,
        }
    }

    #[test]
    fn monotone_surface_is_unchanged() {
        let surface = |x: f64, z: f64| (2.0 * x.hypot(z) - 0.3, 0.49);
        for (r, theta) in [(0.0, 0.0), (0.4, 1.0), (1.2, 4.0)] {
            let p = monotone_project(&surface, r, theta, 20);
            let (mu, var) = surface(r * theta.cos(), r * theta.sin());
            assert!((p.mu_hat - mu).abs() < 1e-12);
            assert!((p.sd_hat - var.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn takes_maximum_along_ray() {
        let surface = |x: f64, _z: f64| {
            let mu = if x < 0.25 { -1.0 } else if x < 0.75 { 0.5 } else { 0.2 };
            (mu, 1.0)
        };
        let p = monotone_project(&surface, 1.0, 0.0, 2);
        assert_eq!(p.mu_hat, 0.5);
        assert_eq!(p.mu, 0.2);
        assert_eq!(p.sd_hat, 1.0);
    }

    #[test]
    fn refinement_finds_peak_between_samples() {
        // Peak at r = 0.3333, off every grid sample.
        let surface = |x: f64, _z: f64| (1.0 - 50.0 * (x - 0.3333).powi(2), 0.01);
        let p = monotone_project(&surface, 1.0, 0.0, 20);
        assert!((p.mu_hat - 1.0).abs() < 1e-12, "{}", p.mu_hat);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..400 {
            let r = 0.3 + i as f64 * 1e-4;
            let p = monotone_project(&surface, r, 0.0, 20);
            assert!(p.mu_hat >= prev - 1e-12, "r = {r}: {} < {prev}", p.mu_hat);
            prev = p.mu_hat;
        }
    }

    #[test]
    fn unit_sd_for_constant_spread() {
        let surface = |x: f64, z: f64| (x + z, 1.0);
        let p = monotone_project(&surface, 0.7, 0.3, 20);
        assert!((p.upper - p.lower - 4.0).abs() < 1e-12);
        assert!((p.sd_hat - 1.0).abs() < 1e-12);
    }

    #[test]
    fn batch_matches_single() {
        let surface = |x: f64, z: f64| ((3.0 * x).sin() + z, 0.1 + x * x);
        let queries = [(0.3, 0.1), (1.1, 2.0), (0.0, 5.0), (1.4, 0.0)];
        let many = monotone_project_many(&surface, &queries, 20);
        for (q, p) in queries.iter().zip(&many) {
            assert_eq!(*p, monotone_project(&surface, q.0, q.1, 20));
            assert!(p.mu_hat >= p.mu);
        }
    }

    #[test]
    fn detection_probability() {
        assert_eq!(detect_prob(&posterior(0.0, 3.0)), 0.5);
        assert!((detect_prob(&posterior(normal::quantile(0.75), 0.0)) - 0.75).abs() < 1e-12);
        assert!((detect_prob(&posterior(0.6745, 0.0)) - 0.75).abs() < 1e-4);
        assert_eq!(detect_prob(&posterior(1e6, 1.0)), 1.0);
    }
}
