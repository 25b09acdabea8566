//! Binocular viewing geometry for a yawing head with counter-rotating eyes.
//!
//! World frame: right-handed, millimetres, origin at the cyclopean eye with
//! the head unrotated, `+z` toward the display, `+x` rightward, `+y` up.
//! Angles cross the public API in degrees and are reported as errors in
//! arcminutes.

use nalgebra::{Rotation3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

pub const ARCMIN_PER_RAD: f64 = 180.0 * 60.0 / std::f64::consts::PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("fixation lies within 1 mm of an eye's centre of rotation")]
    DegenerateFixation,
    #[error("point coincides with a centre of projection")]
    DegeneratePoint,
    #[error("viewing ray does not reach the render plane")]
    NoIntersection,
    #[error("viewing rays diverge; no triangulated point")]
    Divergent,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyeModel {
    pub cor_to_cop_mm: f64,
    /// Horizontal rotation of each CoP about its CoR, `[left, right]`.
    pub visual_axis_offset_deg: [f64; 2],
    pub ipd_mm: f64,
}

impl Default for EyeModel {
    fn default() -> Self {
        Self {
            cor_to_cop_mm: 7.8,
            visual_axis_offset_deg: [0.0, 0.0],
            ipd_mm: 63.0,
        }
    }
}

impl EyeModel {
    pub fn with_ipd(ipd_mm: f64) -> Self {
        Self {
            ipd_mm,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cor_to_cop_mm > 0.0) {
            return Err(GeometryError::InvalidParameter(format!(
                "cor_to_cop_mm must be positive, got {}",
                self.cor_to_cop_mm
            )));
        }
        if !(40.0..=80.0).contains(&self.ipd_mm) {
            return Err(GeometryError::InvalidParameter(format!(
                "ipd_mm must lie in [40, 80], got {}",
                self.ipd_mm
            )));
        }
        Ok(())
    }

    /// Eye centres of rotation in the head frame.
    fn cors_head(&self) -> [Vec3; 2] {
        let half = self.ipd_mm / 2.0;
        [
            Vec3::new(-half, 0.0, -self.cor_to_cop_mm),
            Vec3::new(half, 0.0, -self.cor_to_cop_mm),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadRig {
    /// Distance from the nominal CoP plane back to the vertical yaw axis.
    pub eye_to_axis_mm: f64,
    pub yaw_deg: f64,
}

impl Default for HeadRig {
    fn default() -> Self {
        Self {
            eye_to_axis_mm: 93.0,
            yaw_deg: 0.0,
        }
    }
}

impl HeadRig {
    pub fn at_yaw(yaw_deg: f64) -> Self {
        Self {
            yaw_deg,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eye_to_axis_mm > 0.0) {
            return Err(GeometryError::InvalidParameter(format!(
                "eye_to_axis_mm must be positive, got {}",
                self.eye_to_axis_mm
            )));
        }
        if !(self.yaw_deg.abs() <= 90.0) {
            return Err(GeometryError::InvalidParameter(format!(
                "|yaw_deg| must not exceed 90, got {}",
                self.yaw_deg
            )));
        }
        Ok(())
    }

    /// Rotation taking head-frame vectors into the world frame. Positive yaw
    /// turns `+z` toward `+x`.
    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vec3::y_axis(), self.yaw_deg.to_radians())
    }

    fn pivot(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, -self.eye_to_axis_mm)
    }

    fn head_to_world(&self, p: &Vec3) -> Vec3 {
        let pivot = self.pivot();
        pivot + self.rotation() * (p - pivot)
    }
}

/// What the eyes are fixating: a finite point, or a direction at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fixation {
    Point(Vec3),
    Direction(Vec3),
}

impl Fixation {
    fn direction_from(&self, origin: &Vec3) -> Result<Vec3> {
        match self {
            Fixation::Point(p) => {
                let d = p - origin;
                if d.norm() < 1.0 {
                    return Err(GeometryError::DegenerateFixation);
                }
                Ok(d.normalize())
            }
            Fixation::Direction(d) => {
                let n = d.norm();
                if !(n > 0.0) || !n.is_finite() {
                    return Err(GeometryError::DegenerateFixation);
                }
                Ok(d / n)
            }
        }
    }
}

impl From<Vec3> for Fixation {
    fn from(p: Vec3) -> Self {
        Fixation::Point(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigState {
    pub cor_left: Vec3,
    pub cor_right: Vec3,
    pub cop_left: Vec3,
    pub cop_right: Vec3,
    pub gaze_left: Vec3,
    pub gaze_right: Vec3,
    pub fixation: Fixation,
    pub head: HeadRig,
    pub eye: EyeModel,
}

impl RigState {
    pub fn cyclopean(&self) -> Vec3 {
        (self.cop_left + self.cop_right) / 2.0
    }
}

/// Places both eyes for a head yaw, with each eye rotated about its centre
/// of rotation so that its visual axis passes through the fixation.
pub fn rig_state(
    yaw_deg: f64,
    fixation: impl Into<Fixation>,
    eye: &EyeModel,
    head: &HeadRig,
) -> Result<RigState> {
    eye.validate()?;
    let head = HeadRig { yaw_deg, ..*head };
    head.validate()?;
    let fixation = fixation.into();

    let [cl, cr] = eye.cors_head().map(|c| head.head_to_world(&c));
    let gl = fixation.direction_from(&cl)?;
    let gr = fixation.direction_from(&cr)?;

    let place = |cor: Vec3, gaze: Vec3, offset_deg: f64| {
        let radial = if offset_deg == 0.0 {
            gaze
        } else {
            Rotation3::from_axis_angle(&Vec3::y_axis(), offset_deg.to_radians()) * gaze
        };
        cor + radial * eye.cor_to_cop_mm
    };

    Ok(RigState {
        cor_left: cl,
        cor_right: cr,
        cop_left: place(cl, gl, eye.visual_axis_offset_deg[0]),
        cop_right: place(cr, gr, eye.visual_axis_offset_deg[1]),
        gaze_left: gl,
        gaze_right: gr,
        fixation,
        head,
        eye: *eye,
    })
}

/// CoP translation produced by rotating an eye by `eye_rotation_deg` about its CoR.
pub fn ocular_parallax(eye_rotation_deg: f64, eye: &EyeModel) -> f64 {
    2.0 * eye.cor_to_cop_mm * (eye_rotation_deg.to_radians() / 2.0).sin().abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    /// Both cameras move together (head tracking / reprojection error).
    Tracking,
    /// Cameras move in opposite lateral directions (IPD and eye-relief fit error).
    Fit,
}

impl std::str::FromStr for ErrorMode {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tracking" => Ok(ErrorMode::Tracking),
            "fit" => Ok(ErrorMode::Fit),
            other => Err(GeometryError::InvalidParameter(format!(
                "unknown error mode `{other}` (expected tracking or fit)"
            ))),
        }
    }
}

/// Render-camera placement error in the head frame. Positive `z_err_mm` is
/// toward the display. In fit mode `x_err_mm` is the total baseline error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacementError {
    pub x_err_mm: f64,
    pub z_err_mm: f64,
    pub mode: ErrorMode,
}

impl DisplacementError {
    pub fn new(mode: ErrorMode, x_err_mm: f64, z_err_mm: f64) -> Self {
        Self {
            x_err_mm,
            z_err_mm,
            mode,
        }
    }

    pub fn zero() -> Self {
        Self::new(ErrorMode::Tracking, 0.0, 0.0)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(self.mode, self.x_err_mm * k, self.z_err_mm * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacedCameras {
    pub cam_left: Vec3,
    pub cam_right: Vec3,
}

impl DisplacedCameras {
    pub fn baseline_mm(&self) -> f64 {
        (self.cam_right - self.cam_left).norm()
    }
}

pub fn apply_displacement(rig: &RigState, err: &DisplacementError) -> DisplacedCameras {
    let rot = rig.head.rotation();
    let (dl, dr) = match err.mode {
        ErrorMode::Tracking => {
            let d = Vec3::new(err.x_err_mm, 0.0, err.z_err_mm);
            (d, d)
        }
        ErrorMode::Fit => {
            let half = err.x_err_mm / 2.0;
            (
                Vec3::new(-half, 0.0, err.z_err_mm),
                Vec3::new(half, 0.0, err.z_err_mm),
            )
        }
    };
    DisplacedCameras {
        cam_left: rig.cop_left + rot * dl,
        cam_right: rig.cop_right + rot * dr,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderSetup {
    pub plane_distance_mm: f64,
}

impl RenderSetup {
    pub fn new(plane_distance_mm: f64) -> Result<Self> {
        if !(plane_distance_mm > 0.0) || !plane_distance_mm.is_finite() {
            return Err(GeometryError::InvalidParameter(format!(
                "plane_distance_mm must be positive, got {plane_distance_mm}"
            )));
        }
        Ok(Self { plane_distance_mm })
    }

    pub fn plane_diopters(&self) -> f64 {
        1000.0 / self.plane_distance_mm
    }
}

/// Intersects the ray from `camera` through `point` with the render plane.
pub fn project_to_plane(camera: &Vec3, point: &Vec3, setup: &RenderSetup) -> Result<Vector2<f64>> {
    let d = point - camera;
    if d.z.abs() <= 1e-12 * d.norm().max(1.0) {
        return Err(GeometryError::NoIntersection);
    }
    let t = (setup.plane_distance_mm - camera.z) / d.z;
    if !(t > 0.0) || !t.is_finite() {
        return Err(GeometryError::NoIntersection);
    }
    let hit = camera + d * t;
    Ok(Vector2::new(hit.x, hit.y))
}

/// Closest approach between two rays with non-negative parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangulation {
    pub point: Vec3,
    pub skew_mm: f64,
}

pub fn triangulate(origin_l: &Vec3, dir_l: &Vec3, origin_r: &Vec3, dir_r: &Vec3) -> Result<Triangulation> {
    let w = origin_l - origin_r;
    let a = dir_l.dot(dir_l);
    let b = dir_l.dot(dir_r);
    let c = dir_r.dot(dir_r);
    let d = dir_l.dot(&w);
    let e = dir_r.dot(&w);
    let denom = a * c - b * b;
    if denom <= 1e-14 * a * c {
        return Err(GeometryError::Divergent);
    }
    let s = (b * e - c * d) / denom;
    let t = (a * e - b * d) / denom;
    if s < 0.0 || t < 0.0 {
        return Err(GeometryError::Divergent);
    }
    let pl = origin_l + dir_l * s;
    let pr = origin_r + dir_r * t;
    Ok(Triangulation {
        point: (pl + pr) / 2.0,
        skew_mm: (pl - pr).norm(),
    })
}

/// Signed horizontal angle of `v` about `+y`, measured from `+z` toward `+x`.
fn azimuth(v: &Vec3) -> f64 {
    v.x.atan2(v.z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinocularAngles {
    pub azimuth_left: f64,
    pub azimuth_right: f64,
    pub disparity: f64,
    pub cyclopean_dir: f64,
}

impl BinocularAngles {
    fn from_directions(left: &Vec3, right: &Vec3) -> Self {
        let al = azimuth(left);
        let ar = azimuth(right);
        Self {
            azimuth_left: al,
            azimuth_right: ar,
            disparity: al - ar,
            cyclopean_dir: (al + ar) / 2.0,
        }
    }
}

/// Horizontal azimuths (radians) of `point` from each CoP.
pub fn binocular_angles(cop_l: &Vec3, cop_r: &Vec3, point: &Vec3) -> Result<BinocularAngles> {
    let dl = point - cop_l;
    let dr = point - cop_r;
    if dl.norm() < 1e-9 || dr.norm() < 1e-9 {
        return Err(GeometryError::DegeneratePoint);
    }
    Ok(BinocularAngles::from_directions(&dl, &dr))
}

/// Angles of a point at infinity along `direction`.
pub fn binocular_angles_at_infinity(direction: &Vec3) -> BinocularAngles {
    BinocularAngles::from_directions(direction, direction)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    pub limit_at_fovea_arcmin: f64,
    pub limit_at_6deg_arcmin: f64,
    pub growth_per_deg: f64,
}

impl Default for FusionModel {
    fn default() -> Self {
        Self {
            limit_at_fovea_arcmin: 20.0,
            limit_at_6deg_arcmin: 60.0,
            growth_per_deg: 0.07,
        }
    }
}

/// Fusional limit (arcmin) at an eccentricity in degrees: linear to 6°,
/// compounding growth beyond.
pub fn panum_limit(eccentricity_deg: f64, fusion: &FusionModel) -> f64 {
    let e = eccentricity_deg.max(0.0);
    if e <= 6.0 {
        fusion.limit_at_fovea_arcmin
            + (fusion.limit_at_6deg_arcmin - fusion.limit_at_fovea_arcmin) * e / 6.0
    } else {
        fusion.limit_at_6deg_arcmin * (1.0 + fusion.growth_per_deg).powf(e - 6.0)
    }
}

/// Dioptric band (lower, upper) of ±0.6 D around the display, floored at 0.
pub fn zone_of_comfort(display_diopters: f64) -> (f64, f64) {
    const HALF_WIDTH_D: f64 = 0.6;
    (
        (display_diopters - HALF_WIDTH_D).max(0.0),
        display_diopters + HALF_WIDTH_D,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointErrorRecord {
    pub point_id: String,
    pub disparity_err_arcmin: f64,
    pub visual_dir_err_arcmin: f64,
    /// `None` when the viewed rays do not triangulate.
    pub depth_err_diopters: Option<f64>,
    pub skew_mm: Option<f64>,
    pub reconstructed: Option<Vec3>,
    pub fusible: bool,
    pub eccentricity_deg: f64,
}

impl PointErrorRecord {
    pub fn divergent(&self) -> bool {
        self.reconstructed.is_none()
    }
}

/// Disparity, visual-direction and depth error of one scene point when it is
/// rendered from `cams` onto the display plane and viewed from the true CoPs.
pub fn point_errors(
    point_id: &str,
    point: &Vec3,
    rig: &RigState,
    cams: &DisplacedCameras,
    setup: &RenderSetup,
    fusion: &FusionModel,
) -> Result<PointErrorRecord> {
    let truth = binocular_angles(&rig.cop_left, &rig.cop_right, point)?;

    let to_plane = |cam: &Vec3| -> Result<Vec3> {
        let q = project_to_plane(cam, point, setup)?;
        Ok(Vec3::new(q.x, q.y, setup.plane_distance_mm))
    };
    let ql = to_plane(&cams.cam_left)?;
    let qr = to_plane(&cams.cam_right)?;
    let ray_l = ql - rig.cop_left;
    let ray_r = qr - rig.cop_right;
    let viewed = BinocularAngles::from_directions(&ray_l, &ray_r);

    let disparity_err = (viewed.disparity - truth.disparity) * ARCMIN_PER_RAD;
    let visual_dir_err = (viewed.cyclopean_dir - truth.cyclopean_dir) * ARCMIN_PER_RAD;

    let tri = triangulate(
        &rig.cop_left,
        &ray_l.normalize(),
        &rig.cop_right,
        &ray_r.normalize(),
    );
    let (depth_err, skew, reconstructed) = match tri {
        Ok(t) => {
            let eye = rig.cyclopean();
            let true_depth = (point - eye).norm();
            let seen_depth = (t.point - eye).norm();
            (
                Some(1000.0 / seen_depth - 1000.0 / true_depth),
                Some(t.skew_mm),
                Some(t.point),
            )
        }
        Err(GeometryError::Divergent) => (None, None, None),
        Err(e) => return Err(e),
    };

    // Fusional demand is taken against the vergence held on the true fixation.
    let fixation_truth = match rig.fixation {
        Fixation::Point(f) => binocular_angles(&rig.cop_left, &rig.cop_right, &f)?,
        Fixation::Direction(d) => binocular_angles_at_infinity(&d),
    };
    let eccentricity_deg = (truth.cyclopean_dir - fixation_truth.cyclopean_dir)
        .abs()
        .to_degrees();
    let demand = (viewed.disparity - fixation_truth.disparity).abs() * ARCMIN_PER_RAD;
    let fusible = demand <= panum_limit(eccentricity_deg, fusion);

    Ok(PointErrorRecord {
        point_id: point_id.to_string(),
        disparity_err_arcmin: disparity_err,
        visual_dir_err_arcmin: visual_dir_err,
        depth_err_diopters: depth_err,
        skew_mm: skew,
        reconstructed,
        fusible,
        eccentricity_deg,
    })
}

/// A sweep result for one yaw sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSample {
    pub yaw_deg: f64,
    pub records: Vec<SweepRecord>,
}

/// Either a computed record or the reason a point could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub point_id: String,
    pub result: std::result::Result<PointErrorRecord, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub point_id: String,
    pub visual_dir_peak_to_peak_arcmin: f64,
    pub max_abs_disparity_err_arcmin: f64,
    pub min_disparity_err_arcmin: f64,
    pub max_disparity_err_arcmin: f64,
    pub failed_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VorSweep {
    pub samples: Vec<SweepSample>,
    pub summaries: Vec<PointSummary>,
}

impl VorSweep {
    pub fn summary(&self, point_id: &str) -> Option<&PointSummary> {
        self.summaries.iter().find(|s| s.point_id == point_id)
    }
}

/// Yaw values from `start` to `end` inclusive in increments of `step`.
pub fn yaw_samples(start_deg: f64, end_deg: f64, step_deg: f64) -> Result<Vec<f64>> {
    if !(step_deg > 0.0) || !step_deg.is_finite() {
        return Err(GeometryError::InvalidParameter(format!(
            "sweep step must be positive, got {step_deg}"
        )));
    }
    if !(end_deg >= start_deg) {
        return Err(GeometryError::InvalidParameter(format!(
            "sweep range [{start_deg}, {end_deg}] is empty"
        )));
    }
    let span = end_deg - start_deg;
    let intervals = (span / step_deg - 1e-9).ceil().max(0.0) as usize;
    let mut yaws: Vec<f64> = (0..intervals)
        .map(|i| start_deg + i as f64 * step_deg)
        .collect();
    yaws.push(end_deg);
    Ok(yaws)
}

/// Inputs shared by every sample of a VOR sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepParams {
    pub eye: EyeModel,
    pub head: HeadRig,
    pub fusion: FusionModel,
    pub yaw_start_deg: f64,
    pub yaw_end_deg: f64,
    pub step_deg: f64,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            eye: EyeModel::default(),
            head: HeadRig::default(),
            fusion: FusionModel::default(),
            yaw_start_deg: -20.0,
            yaw_end_deg: 20.0,
            step_deg: 0.5,
        }
    }
}

/// Evaluates every scene point across a horizontal VOR head sweep. Point
/// failures are recorded in place and never abort the sweep.
pub fn vor_sweep(
    points: &[(String, Vec3)],
    fixation: Fixation,
    err: &DisplacementError,
    setup: &RenderSetup,
    params: &SweepParams,
) -> Result<VorSweep> {
    let yaws = yaw_samples(params.yaw_start_deg, params.yaw_end_deg, params.step_deg)?;
    let mut samples = Vec::with_capacity(yaws.len());
    for yaw in yaws {
        let rig = rig_state(yaw, fixation, &params.eye, &params.head);
        let records = points
            .iter()
            .map(|(id, p)| {
                let result = rig
                    .as_ref()
                    .map_err(|e| e.clone())
                    .and_then(|rig| {
                        let cams = apply_displacement(rig, err);
                        point_errors(id, p, rig, &cams, setup, &params.fusion)
                    })
                    .map_err(|e| e.to_string());
                SweepRecord {
                    point_id: id.clone(),
                    result,
                }
            })
            .collect();
        samples.push(SweepSample {
            yaw_deg: yaw,
            records,
        });
    }

    let summaries = points
        .iter()
        .enumerate()
        .map(|(i, (id, _))| {
            let mut vd_min = f64::INFINITY;
            let mut vd_max = f64::NEG_INFINITY;
            let mut d_min = f64::INFINITY;
            let mut d_max = f64::NEG_INFINITY;
            let mut failed = 0;
            for s in &samples {
                match &s.records[i].result {
                    Ok(r) => {
                        vd_min = vd_min.min(r.visual_dir_err_arcmin);
                        vd_max = vd_max.max(r.visual_dir_err_arcmin);
                        d_min = d_min.min(r.disparity_err_arcmin);
                        d_max = d_max.max(r.disparity_err_arcmin);
                    }
                    Err(_) => failed += 1,
                }
            }
            let ok = failed < samples.len();
            PointSummary {
                point_id: id.clone(),
                visual_dir_peak_to_peak_arcmin: if ok { vd_max - vd_min } else { f64::NAN },
                max_abs_disparity_err_arcmin: if ok { d_max.abs().max(d_min.abs()) } else { f64::NAN },
                min_disparity_err_arcmin: if ok { d_min } else { f64::NAN },
                max_disparity_err_arcmin: if ok { d_max } else { f64::NAN },
                failed_samples: failed,
            }
        })
        .collect();

    Ok(VorSweep { samples, summaries })
}
