use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::projection::{detect_prob, monotone_project_many, DEFAULT_GRID};
use super::{max_radius, AxisLimits, LatentSurface, ThresholdError};

/// Contours with more than this fraction of censored angles are rejected.
pub const FULLY_CENSORED_FRACTION: f64 = 0.25;

const BISECTION_REL_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourOptions {
    pub p_target: f64,
    pub n_angles: usize,
    pub grid: usize,
}

impl Default for ContourOptions {
    fn default() -> Self {
        Self {
            p_target: 0.75,
            n_angles: 64,
            grid: DEFAULT_GRID,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCrossing {
    pub theta: f64,
    /// Normalized radius of the crossing.
    pub r: f64,
    pub x_mm: f64,
    pub z_mm: f64,
}

impl ThresholdCrossing {
    pub fn radius_mm(&self) -> f64 {
        self.x_mm.hypot(self.z_mm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdContour {
    pub p_target: f64,
    /// Crossings in increasing angle; censored angles are skipped.
    pub vertices: Vec<ThresholdCrossing>,
    pub censored_angles: Vec<f64>,
    pub area_mm2: Option<f64>,
    pub centroid: Option<[f64; 2]>,
    pub fully_censored: bool,
}

impl ThresholdContour {
    pub fn vertices_mm(&self) -> Vec<[f64; 2]> {
        self.vertices.iter().map(|v| [v.x_mm, v.z_mm]).collect()
    }

    pub fn radii_mm(&self) -> Vec<f64> {
        self.vertices.iter().map(ThresholdCrossing::radius_mm).collect()
    }

    pub fn median_radius_mm(&self) -> Option<f64> {
        let mut r = self.radii_mm();
        if r.is_empty() {
            return None;
        }
        r.sort_by(f64::total_cmp);
        let n = r.len();
        Some(if n % 2 == 1 {
            r[n / 2]
        } else {
            0.5 * (r[n / 2 - 1] + r[n / 2])
        })
    }
}

/// Shoelace area and centroid of a simple polygon. Returns `None` for fewer
/// than three vertices or zero area.
pub fn polygon_area_centroid(vertices: &[[f64; 2]]) -> Option<(f64, [f64; 2])> {
    if vertices.len() < 3 {
        return None;
    }
    let mut twice_area = 0.0;
    let mut cx = 0.0;
    let mut cz = 0.0;
    for (i, a) in vertices.iter().enumerate() {
        let b = vertices[(i + 1) % vertices.len()];
        let cross = a[0] * b[1] - b[0] * a[1];
        twice_area += cross;
        cx += (a[0] + b[0]) * cross;
        cz += (a[1] + b[1]) * cross;
    }
    if twice_area == 0.0 {
        return None;
    }
    let area = twice_area / 2.0;
    Some((area.abs(), [cx / (6.0 * area), cz / (6.0 * area)]))
}

/// Bisects every angle at once; `None` marks a censored angle.
fn radial_crossings<S: LatentSurface + ?Sized>(
    surface: &S,
    thetas: &[f64],
    p_target: f64,
    grid: usize,
    limits: &AxisLimits,
) -> Vec<Option<ThresholdCrossing>> {
    let prob_at = |queries: &[(f64, f64)]| -> Vec<f64> {
        monotone_project_many(surface, queries, grid).iter().map(detect_prob).collect()
    };
    let outer: Vec<(f64, f64)> = thetas.iter().map(|&t| (max_radius(t), t)).collect();
    let at_outer = prob_at(&outer);
    let at_origin = prob_at(&thetas.iter().map(|&t| (0.0, t)).collect::<Vec<_>>());

    // (lo, hi) brackets for angles that still need bisection.
    let mut bracket: Vec<Option<(f64, f64)>> = thetas
        .iter()
        .enumerate()
        .map(|(i, _)| {
            if at_outer[i] < p_target || at_origin[i] >= p_target {
                None
            } else {
                Some((0.0, outer[i].0))
            }
        })
        .collect();

    loop {
        let active: Vec<usize> = bracket
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.filter(|(lo, hi)| hi - lo > BISECTION_REL_TOL * hi).map(|_| i))
            .collect();
        if active.is_empty() {
            break;
        }
        let queries: Vec<(f64, f64)> = active
            .iter()
            .map(|&i| {
                let (lo, hi) = bracket[i].unwrap();
                (0.5 * (lo + hi), thetas[i])
            })
            .collect();
        let probs = prob_at(&queries);
        for ((&i, q), p) in active.iter().zip(&queries).zip(probs) {
            let (lo, hi) = bracket[i].as_mut().unwrap();
            if p >= p_target {
                *hi = q.0;
            } else {
                *lo = q.0;
            }
        }
    }

    thetas
        .iter()
        .enumerate()
        .map(|(i, &theta)| {
            let r = if at_outer[i] < p_target {
                return None;
            } else if at_origin[i] >= p_target {
                0.0
            } else {
                let (lo, hi) = bracket[i].unwrap();
                0.5 * (lo + hi)
            };
            let (s, c) = theta.sin_cos();
            let (x_mm, z_mm) = limits.to_mm(r * c, r * s);
            Some(ThresholdCrossing { theta, r, x_mm, z_mm })
        })
        .collect()
}

/// Radius along `theta` where the projected detection probability reaches
/// `p_target`, or `None` when it stays below target out to the limit box.
pub fn threshold_radius<S: LatentSurface + ?Sized>(
    surface: &S,
    theta: f64,
    p_target: f64,
    limits: &AxisLimits,
    grid: usize,
) -> Result<Option<ThresholdCrossing>, ThresholdError> {
    check_target(p_target)?;
    Ok(radial_crossings(surface, &[theta], p_target, grid, limits)[0])
}

fn check_target(p_target: f64) -> Result<(), ThresholdError> {
    if !(p_target > 0.5 && p_target < 1.0) {
        return Err(ThresholdError::InvalidInput(format!(
            "target probability must lie in (0.5, 1), got {p_target}"
        )));
    }
    Ok(())
}

/// Traces the iso-probability contour at uniformly spaced angles.
pub fn extract_contour<S: LatentSurface + ?Sized>(
    surface: &S,
    limits: &AxisLimits,
    options: &ContourOptions,
) -> Result<ThresholdContour, ThresholdError> {
    check_target(options.p_target)?;
    if options.n_angles < 8 {
        return Err(ThresholdError::InvalidInput(format!(
            "need at least 8 angles, got {}",
            options.n_angles
        )));
    }
    let thetas: Vec<f64> = (0..options.n_angles)
        .map(|i| TAU * i as f64 / options.n_angles as f64)
        .collect();
    let crossings = radial_crossings(surface, &thetas, options.p_target, options.grid, limits);

    let mut vertices = Vec::new();
    let mut censored_angles = Vec::new();
    for (theta, c) in thetas.iter().zip(crossings) {
        match c {
            Some(v) => vertices.push(v),
            None => censored_angles.push(*theta),
        }
    }
    let mut contour = ThresholdContour {
        p_target: options.p_target,
        vertices,
        censored_angles,
        area_mm2: None,
        centroid: None,
        fully_censored: false,
    };

    let censored = contour.censored_angles.len();
    let polygon = polygon_area_centroid(&contour.vertices_mm());
    if censored as f64 > FULLY_CENSORED_FRACTION * options.n_angles as f64 || contour.vertices.len() < 3 {
        contour.fully_censored = true;
        return Err(ThresholdError::FullyCensored {
            censored,
            total: options.n_angles,
            partial: Box::new(contour),
        });
    }
    match polygon {
        Some((area, centroid)) => {
            contour.area_mm2 = Some(area);
            contour.centroid = Some(centroid);
        }
        // Every crossing sits at the origin.
        None => {
            contour.area_mm2 = Some(0.0);
            contour.centroid = Some([0.0, 0.0]);
        }
    }
    Ok(contour)
}
