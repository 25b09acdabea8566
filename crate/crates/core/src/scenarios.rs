//! Canonical scenes and error presets for the AR and VR viewing conditions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    DisplacementError, ErrorMode, EyeModel, Fixation, GeometryError, HeadRig, RenderSetup, Vec3,
};

/// Near AR display distance (1.97 D).
pub const AR_NEAR_DISPLAY_MM: f64 = 507.0;
/// Optical post tops in the near AR scene (2.61 D).
pub const AR_NEAR_POST_MM: f64 = 383.0;
/// Far display and render plane (0.77 D).
pub const FAR_DISPLAY_MM: f64 = 1300.0;
/// Dioptric offset of the posts in front of the far display.
pub const POST_OFFSET_D: f64 = 0.64;
pub const POST_LATERAL_MM: f64 = 100.0;
pub const TEXT_SLANT_DEG: f64 = 12.8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("unknown scenario preset `{0}`")]
    UnknownPreset(String),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePoint {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ScenePoint {
    pub fn new(id: impl Into<String>, p: Vec3) -> Self {
        Self {
            id: id.into(),
            x: p.x,
            y: p.y,
            z: p.z,
        }
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub points: Vec<ScenePoint>,
    /// Must coincide with one of `points`.
    pub fixation: [f64; 3],
    pub display_distance_mm: f64,
}

impl Scene {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.points.is_empty() {
            return Err(ScenarioError::InvalidScene("scene has no points".into()));
        }
        if !(self.display_distance_mm > 0.0) {
            return Err(ScenarioError::InvalidScene(format!(
                "display distance must be positive, got {}",
                self.display_distance_mm
            )));
        }
        let f = self.fixation_point();
        if !self.points.iter().all(|p| p.position().iter().all(|c| c.is_finite())) {
            return Err(ScenarioError::InvalidScene("non-finite point coordinate".into()));
        }
        if self.fixation_id().is_none() {
            return Err(ScenarioError::InvalidScene(format!(
                "fixation ({}, {}, {}) is not one of the scene points",
                f.x, f.y, f.z
            )));
        }
        Ok(())
    }

    pub fn fixation_point(&self) -> Vec3 {
        Vec3::from(self.fixation)
    }

    pub fn fixation_id(&self) -> Option<&str> {
        let f = self.fixation_point();
        self.points
            .iter()
            .find(|p| (p.position() - f).norm() < 1e-9)
            .map(|p| p.id.as_str())
    }

    pub fn labelled_points(&self) -> Vec<(String, Vec3)> {
        self.points.iter().map(|p| (p.id.clone(), p.position())).collect()
    }

    pub fn render_setup(&self) -> Result<RenderSetup, ScenarioError> {
        Ok(RenderSetup::new(self.display_distance_mm)?)
    }

    pub fn fixation(&self) -> Fixation {
        Fixation::Point(self.fixation_point())
    }

    /// Mirror image in the `x = 0` plane.
    pub fn mirrored(&self) -> Scene {
        Scene {
            points: self
                .points
                .iter()
                .map(|p| ScenePoint {
                    x: -p.x,
                    ..p.clone()
                })
                .collect(),
            fixation: [-self.fixation[0], self.fixation[1], self.fixation[2]],
            display_distance_mm: self.display_distance_mm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioPreset {
    ArNear,
    ArFar,
    VrGridNear,
    VrGridFar,
    TextSlant,
}

impl ScenarioPreset {
    pub const ALL: [ScenarioPreset; 5] = [
        ScenarioPreset::ArNear,
        ScenarioPreset::ArFar,
        ScenarioPreset::VrGridNear,
        ScenarioPreset::VrGridFar,
        ScenarioPreset::TextSlant,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioPreset::ArNear => "ar-near",
            ScenarioPreset::ArFar => "ar-far",
            ScenarioPreset::VrGridNear => "vr-grid-near",
            ScenarioPreset::VrGridFar => "vr-grid-far",
            ScenarioPreset::TextSlant => "text-slant",
        }
    }
}

impl std::str::FromStr for ScenarioPreset {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioPreset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| ScenarioError::UnknownPreset(s.to_string()))
    }
}

impl std::fmt::Display for ScenarioPreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn posts(display_mm: f64, depth_mm: f64) -> Scene {
    let points = [("post-left", -POST_LATERAL_MM), ("post-center", 0.0), ("post-right", POST_LATERAL_MM)]
        .into_iter()
        .map(|(id, x)| ScenePoint::new(id, Vec3::new(x, 0.0, depth_mm)))
        .collect();
    Scene {
        points,
        fixation: [0.0, 0.0, depth_mm],
        display_distance_mm: display_mm,
    }
}

fn depth_grid(display_mm: f64) -> Scene {
    let steps = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let mut points = Vec::with_capacity(125);
    for (k, dz) in steps.iter().enumerate() {
        for (j, dy) in steps.iter().enumerate() {
            for (i, dx) in steps.iter().enumerate() {
                points.push(ScenePoint::new(
                    format!("g{i}{j}{k}"),
                    Vec3::new(dx * 125.0, dy * 125.0, display_mm + dz * 150.0),
                ));
            }
        }
    }
    Scene {
        points,
        fixation: [0.0, 0.0, display_mm],
        display_distance_mm: display_mm,
    }
}

fn slanted_text(display_mm: f64) -> Scene {
    let (s, c) = TEXT_SLANT_DEG.to_radians().sin_cos();
    let mut points = Vec::with_capacity(121);
    for j in 0..11 {
        let v = -150.0 + 30.0 * j as f64;
        for i in 0..11 {
            let u = -150.0 + 30.0 * i as f64;
            // Top edge tilts away from the viewer.
            points.push(ScenePoint::new(
                format!("t{i:02}{j:02}"),
                Vec3::new(u, v * c, display_mm + v * s),
            ));
        }
    }
    Scene {
        points,
        fixation: [0.0, 0.0, display_mm],
        display_distance_mm: display_mm,
    }
}

pub fn build_scenario(preset: ScenarioPreset) -> (Scene, RenderSetup) {
    let scene = match preset {
        ScenarioPreset::ArNear => posts(AR_NEAR_DISPLAY_MM, AR_NEAR_POST_MM),
        ScenarioPreset::ArFar => {
            let depth = 1000.0 / (1000.0 / FAR_DISPLAY_MM + POST_OFFSET_D);
            posts(FAR_DISPLAY_MM, depth)
        }
        ScenarioPreset::VrGridNear => depth_grid(AR_NEAR_DISPLAY_MM),
        ScenarioPreset::VrGridFar => depth_grid(FAR_DISPLAY_MM),
        ScenarioPreset::TextSlant => slanted_text(AR_NEAR_DISPLAY_MM),
    };
    let setup = RenderSetup {
        plane_distance_mm: scene.display_distance_mm,
    };
    (scene, setup)
}

/// Observer and error pair for the IPD-versus-tracking comparison: a 63 mm
/// observer at −20° yaw, rendered with a 51 mm camera baseline or with a
/// −12 mm lateral head offset.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSetup {
    pub eye: EyeModel,
    pub head: HeadRig,
    pub fit: DisplacementError,
    pub tracking: DisplacementError,
}

pub fn fig6_setup() -> ComparisonSetup {
    ComparisonSetup {
        eye: EyeModel::with_ipd(63.0),
        head: HeadRig::at_yaw(-20.0),
        fit: DisplacementError::new(ErrorMode::Fit, -12.0, 0.0),
        tracking: DisplacementError::new(ErrorMode::Tracking, -12.0, 0.0),
    }
}

/// −1.5 mm eye-relief error combined with a −1.5 mm camera-separation error.
pub fn ar_fit_anchor() -> DisplacementError {
    DisplacementError::new(ErrorMode::Fit, -1.5, -1.5)
}

/// −1.5 mm eye-relief error combined with a −1.5 mm lateral tracking error.
pub fn ar_tracking_anchor() -> DisplacementError {
    DisplacementError::new(ErrorMode::Tracking, -1.5, -1.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_displacement, point_errors, rig_state, FusionModel};

    #[test]
    fn ar_presets_use_quoted_distances() {
        let (scene, setup) = build_scenario(ScenarioPreset::ArNear);
        assert_eq!(setup.plane_distance_mm, 507.0);
        assert!(scene.points.iter().all(|p| p.z == 383.0));
        assert_eq!(scene.fixation_id(), Some("post-center"));

        let (scene, setup) = build_scenario(ScenarioPreset::ArFar);
        assert_eq!(setup.plane_distance_mm, 1300.0);
        let d = 1000.0 / scene.points[0].z - 1000.0 / 1300.0;
        assert!((d - 0.64).abs() < 1e-12);
        assert!((scene.points[0].z - 709.6).abs() < 0.1);
    }

    #[test]
    fn grid_spans_thirty_cm_about_display() {
        for preset in [ScenarioPreset::VrGridNear, ScenarioPreset::VrGridFar] {
            let (scene, setup) = build_scenario(preset);
            assert_eq!(scene.points.len(), 125);
            let zs: Vec<f64> = scene.points.iter().map(|p| p.z - setup.plane_distance_mm).collect();
            assert_eq!(zs.iter().cloned().fold(f64::INFINITY, f64::min), -300.0);
            assert_eq!(zs.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 300.0);
            let xmax = scene.points.iter().map(|p| p.x.abs()).fold(0.0, f64::max);
            assert_eq!(xmax, 250.0);
            scene.validate().unwrap();
        }
    }

    #[test]
    fn text_lies_on_slanted_plane() {
        let (scene, setup) = build_scenario(ScenarioPreset::TextSlant);
        assert_eq!(scene.points.len(), 121);
        let (s, c) = TEXT_SLANT_DEG.to_radians().sin_cos();
        // Plane through (0, 0, D) with normal (0, -sin, cos).
        let n = Vec3::new(0.0, -s, c);
        let o = Vec3::new(0.0, 0.0, setup.plane_distance_mm);
        for p in &scene.points {
            assert!((p.position() - o).dot(&n).abs() < 1e-9);
        }
        let angle = n.angle(&Vec3::z()).to_degrees();
        assert!((angle - 12.8).abs() < 1e-12);
        let top = scene.points.iter().max_by(|a, b| a.y.total_cmp(&b.y)).unwrap();
        assert!(top.z > setup.plane_distance_mm);
    }

    #[test]
    fn preset_names_round_trip() {
        for p in ScenarioPreset::ALL {
            assert_eq!(p.name().parse::<ScenarioPreset>().unwrap(), p);
        }
        assert_eq!(
            "city".parse::<ScenarioPreset>(),
            Err(ScenarioError::UnknownPreset("city".into()))
        );
    }

    #[test]
    fn comparison_setup_baselines() {
        let cfg = fig6_setup();
        let rig = rig_state(cfg.head.yaw_deg, Fixation::Direction(Vec3::z()), &cfg.eye, &cfg.head).unwrap();
        let fit = apply_displacement(&rig, &cfg.fit);
        let cop_base = (rig.cop_right - rig.cop_left).norm();
        assert!((fit.baseline_mm() - (cop_base - 12.0)).abs() < 1e-9);
        assert!((cop_base - 63.0).abs() < 1e-9);
        let trk = apply_displacement(&rig, &cfg.tracking);
        let shift = trk.cam_left - rig.cop_left;
        assert!((shift.norm() - 12.0).abs() < 1e-12);
        assert!((shift - (trk.cam_right - rig.cop_right)).norm() < 1e-12);
    }

    #[test]
    fn symmetric_fit_error_leaves_on_axis_direction_unchanged() {
        let cfg = fig6_setup();
        let setup = RenderSetup::new(1300.0).unwrap();
        let fix = Vec3::new(0.0, 0.0, 1300.0);
        let rig = rig_state(0.0, fix, &cfg.eye, &HeadRig::default()).unwrap();
        let cams = apply_displacement(&rig, &cfg.fit);
        for z in [800.0, 1300.0, 1600.0] {
            let r = point_errors("p", &Vec3::new(0.0, 0.0, z), &rig, &cams, &setup, &FusionModel::default())
                .unwrap();
            assert!(r.visual_dir_err_arcmin.abs() < 1e-9);
        }
    }

    #[test]
    fn scene_validation() {
        let (mut scene, _) = build_scenario(ScenarioPreset::ArNear);
        scene.fixation = [1.0, 0.0, 383.0];
        assert!(matches!(scene.validate(), Err(ScenarioError::InvalidScene(_))));
        scene.points.clear();
        assert!(scene.validate().is_err());
    }
}
