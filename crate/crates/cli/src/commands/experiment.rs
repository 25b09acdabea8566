//! `experiment`: a seeded adaptive run against a simulated observer.

use clap::Args;
use wlr_core::harness::{run_experiment, ExperimentConfig, ExperimentResult, SimulatedObserver};

use crate::commands::fit::write_contours;
use crate::error::Result;
use crate::formats::{trials_csv, write_bytes, ContourRecord};
use crate::Common;

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// Observer spec, e.g. `circular:a=8,s=2,lapse=0`.
    #[arg(long)]
    pub observer: SimulatedObserver,
    #[arg(long, default_value_t = 110)]
    pub budget: usize,
    #[arg(long, default_value_t = 25)]
    pub n_init: usize,
    #[arg(long, default_value_t = 0.75)]
    pub p_target: f64,
    #[arg(long, default_value = "sim")]
    pub subject: String,
    #[arg(long, default_value = "sim")]
    pub condition: String,
}

pub struct ExperimentOutput {
    pub result: ExperimentResult,
    pub record: ContourRecord,
}

/// `--seed` seeds both the observer's responses and the final fit.
pub fn run(args: &ExperimentArgs, common: &Common) -> Result<ExperimentOutput> {
    let config = ExperimentConfig {
        limits: common.limits(),
        n_init: args.n_init,
        budget: args.budget,
        p_target: args.p_target,
        seed: common.seed,
        subject: args.subject.clone(),
        condition: args.condition.clone(),
        ..ExperimentConfig::default()
    };
    let observer = args.observer.with_seed(common.seed);
    let result = run_experiment(&observer, &config)?;
    let contour = result.contour_or_partial().expect("harness returns a contour or a censored partial");
    let record = ContourRecord::new(&config.subject, &config.condition, contour);
    let trials = result.log.records();

    write_bytes(&common.out.join("trials.csv"), &trials_csv(&trials))?;
    write_contours(&common.out, std::slice::from_ref(&record), &config.limits, &trials)?;
    match (record.area_mm2, contour.median_radius_mm()) {
        (Some(a), Some(r)) => println!("{} trials, area {a:.2} mm², median radius {r:.3} mm", trials.len()),
        _ => println!("{} trials, fully censored", trials.len()),
    }
    Ok(ExperimentOutput { result, record })
}
