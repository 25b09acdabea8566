//! `simulate`: per-point errors across a horizontal VOR head sweep.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use wlr_core::geometry::{vor_sweep, DisplacementError, ErrorMode, EyeModel, PointSummary, SweepParams, VorSweep};
use wlr_core::scenarios::{build_scenario, ScenarioPreset, Scene};

use crate::error::{CliError, Result};
use crate::formats::{csv_text, opt, read_json, write_bytes, write_json};
use crate::{svg, Common};

pub const SWEEP_HEADER: [&str; 7] = [
    "phi_deg",
    "point_id",
    "disparity_err_arcmin",
    "visual_dir_err_arcmin",
    "depth_err_diopters",
    "skew_mm",
    "fusible",
];

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scene preset: ar-near, ar-far, vr-grid-near, vr-grid-far, text-slant.
    #[arg(long, conflicts_with = "scene", required_unless_present = "scene")]
    pub scenario: Option<ScenarioPreset>,
    /// Scene JSON file instead of a preset.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Error mode: `tracking` moves both cameras, `fit` moves them apart.
    #[arg(long, default_value = "tracking")]
    pub mode: ErrorMode,
    /// Lateral error in mm (total baseline error in fit mode).
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub x_err: f64,
    /// Eye-relief error in mm, positive toward the display.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub z_err: f64,
    #[arg(long, default_value_t = 63.0, allow_hyphen_values = true)]
    pub ipd: f64,
    #[arg(long, default_value_t = -20.0, allow_hyphen_values = true)]
    pub yaw_start: f64,
    #[arg(long, default_value_t = 20.0, allow_hyphen_values = true)]
    pub yaw_end: f64,
    #[arg(long, default_value_t = 0.5)]
    pub step: f64,
    /// Also write a disparity heatmap.
    #[arg(long)]
    pub svg: bool,
}

impl SimulateArgs {
    pub fn preset(preset: ScenarioPreset) -> Self {
        Self {
            scenario: Some(preset),
            scene: None,
            mode: ErrorMode::Tracking,
            x_err: 0.0,
            z_err: 0.0,
            ipd: 63.0,
            yaw_start: -20.0,
            yaw_end: 20.0,
            step: 0.5,
            svg: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub scene: String,
    pub error: DisplacementError,
    pub ipd_mm: f64,
    pub yaw_samples: usize,
    pub fixation_point_id: String,
    /// Peak-to-peak visual direction and disparity extremes at fixation.
    pub fixation: PointSummary,
    pub points: Vec<PointSummary>,
}

pub struct SimulateOutput {
    pub sweep: VorSweep,
    pub summary: SweepSummary,
}

pub fn sweep_csv(sweep: &VorSweep) -> Vec<u8> {
    let rows = sweep.samples.iter().flat_map(|s| {
        s.records.iter().map(move |rec| match &rec.result {
            Ok(e) => [
                s.yaw_deg.to_string(),
                rec.point_id.clone(),
                e.disparity_err_arcmin.to_string(),
                e.visual_dir_err_arcmin.to_string(),
                opt(e.depth_err_diopters),
                opt(e.skew_mm),
                e.fusible.to_string(),
            ],
            Err(_) => [
                s.yaw_deg.to_string(),
                rec.point_id.clone(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ],
        })
    });
    csv_text(&SWEEP_HEADER, rows)
}

pub fn run(args: &SimulateArgs, common: &Common) -> Result<SimulateOutput> {
    let (scene, label) = match (&args.scenario, &args.scene) {
        (Some(preset), _) => (build_scenario(*preset).0, preset.to_string()),
        (None, Some(path)) => (read_json::<Scene>(path)?, path.display().to_string()),
        (None, None) => return Err(CliError::Config("one of --scenario or --scene is required".into())),
    };
    scene.validate()?;
    if !(args.ipd > 0.0) || !args.ipd.is_finite() {
        return Err(CliError::Config(format!("--ipd must be positive, got {}", args.ipd)));
    }
    if !args.x_err.is_finite() || !args.z_err.is_finite() {
        return Err(CliError::Config("displacement errors must be finite".into()));
    }
    let err = DisplacementError::new(args.mode, args.x_err, args.z_err);
    let params = SweepParams {
        eye: EyeModel::with_ipd(args.ipd),
        yaw_start_deg: args.yaw_start,
        yaw_end_deg: args.yaw_end,
        step_deg: args.step,
        ..SweepParams::default()
    };
    let sweep = vor_sweep(&scene.labelled_points(), scene.fixation(), &err, &scene.render_setup()?, &params)?;
    let fixation_id = scene.fixation_id().expect("validated scene").to_string();
    let summary = SweepSummary {
        scene: label,
        error: err,
        ipd_mm: args.ipd,
        yaw_samples: sweep.samples.len(),
        fixation: sweep.summary(&fixation_id).expect("fixation is a scene point").clone(),
        fixation_point_id: fixation_id,
        points: sweep.summaries.clone(),
    };

    write_bytes(&common.out.join("sweep.csv"), &sweep_csv(&sweep))?;
    write_json(&common.out.join("summary.json"), &summary)?;
    if args.svg {
        write_bytes(&common.out.join("sweep.svg"), svg::sweep_heatmap(&sweep).as_bytes())?;
    }
    println!(
        "{}: {} yaw samples, fixation `{}` disparity error max |{:.3}| arcmin, visual direction peak-to-peak {:.3} arcmin",
        summary.scene,
        summary.yaw_samples,
        summary.fixation_point_id,
        summary.fixation.max_abs_disparity_err_arcmin,
        summary.fixation.visual_dir_peak_to_peak_arcmin
    );
    Ok(SimulateOutput { sweep, summary })
}
