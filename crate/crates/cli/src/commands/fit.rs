//! `fit`: one threshold contour per (subject, condition) of a trials CSV.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use wlr_core::threshold::{
    extract_contour, fit_gp, AxisLimits, ContourOptions, FitOptions, ThresholdContour, ThresholdError, TrialRecord,
};

use crate::error::{CliError, Result};
use crate::formats::{read_trials, write_bytes, write_json, ContourRecord};
use crate::{svg, Common};

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// CSV with header `subject,condition,x_err_mm,z_err_mm,correct`.
    #[arg(long)]
    pub trials: PathBuf,
    /// Detection probability of the contour.
    #[arg(long, default_value_t = 0.75)]
    pub p_target: f64,
}

/// Fits one group. A fully censored outcome becomes a flagged record.
pub fn fit_group(
    trials: &[TrialRecord],
    limits: &AxisLimits,
    p_target: f64,
    seed: u64,
) -> std::result::Result<ThresholdContour, ThresholdError> {
    let model = fit_gp(trials, limits, &FitOptions { seed, ..FitOptions::default() })?;
    match extract_contour(&model, limits, &ContourOptions { p_target, ..ContourOptions::default() }) {
        Ok(c) => Ok(c),
        Err(ThresholdError::FullyCensored { partial, .. }) => Ok(*partial),
        Err(e) => Err(e),
    }
}

/// Writes `contours.json` and one SVG per record.
pub fn write_contours(
    out: &Path,
    records: &[ContourRecord],
    limits: &AxisLimits,
    trials: &[TrialRecord],
) -> Result<()> {
    write_json(&out.join("contours.json"), records)?;
    for rec in records {
        let group: Vec<TrialRecord> = trials
            .iter()
            .filter(|t| t.subject == rec.subject && t.condition == rec.condition)
            .cloned()
            .collect();
        let name = format!("contour_{}_{}.svg", svg::slug(&rec.subject), svg::slug(&rec.condition));
        write_bytes(&out.join(name), svg::contour_plot(rec, limits, &group).as_bytes())?;
    }
    Ok(())
}

pub fn run(args: &FitArgs, common: &Common) -> Result<Vec<ContourRecord>> {
    if !(args.p_target > 0.0 && args.p_target < 1.0) {
        return Err(CliError::Config(format!("--p-target must lie in (0, 1), got {}", args.p_target)));
    }
    let limits = common.limits();
    let trials = read_trials(&args.trials)?;
    let mut groups: BTreeMap<(String, String), Vec<TrialRecord>> = BTreeMap::new();
    for t in &trials {
        groups.entry((t.subject.clone(), t.condition.clone())).or_default().push(t.clone());
    }
    let mut records = Vec::with_capacity(groups.len());
    for ((subject, condition), group) in &groups {
        let contour = fit_group(group, &limits, args.p_target, common.seed)
            .map_err(|e| CliError::Config(format!("{subject}/{condition}: {e}")))?;
        let rec = ContourRecord::new(subject, condition, &contour);
        match rec.area_mm2 {
            Some(a) => println!("{subject}/{condition}: {} trials, area {a:.2} mm²", group.len()),
            None => println!("{subject}/{condition}: {} trials, fully censored", group.len()),
        }
        records.push(rec);
    }
    write_contours(&common.out, &records, &limits, &trials)?;
    Ok(records)
}
