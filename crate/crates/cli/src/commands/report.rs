//! `report`: per-subject areas and a paired comparison of two conditions.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;
use wlr_core::threshold::{paired_t_test, PairedTTest, ThresholdError};

use crate::error::{CliError, Result};
use crate::formats::{read_json, write_json, ContourRecord};
use crate::Common;

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Contour JSON of the first condition.
    pub first: PathBuf,
    /// Contour JSON of the second condition.
    pub second: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubjectRow {
    pub subject: String,
    pub area_mm2: [Option<f64>; 2],
    pub centroid: [Option<[f64; 2]>; 2],
    pub fully_censored: [bool; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionStats {
    pub label: String,
    pub n: usize,
    pub mean_area_mm2: Option<f64>,
    pub sd_area_mm2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub subjects: Vec<SubjectRow>,
    /// Subjects censored in either condition, left out of the statistics.
    pub excluded: Vec<String>,
    pub conditions: [ConditionStats; 2],
    pub t_test: Option<PairedTTest>,
    /// Why no test was computed, when it was not.
    pub t_test_error: Option<String>,
}

fn load(path: &Path) -> Result<(String, BTreeMap<String, ContourRecord>)> {
    let records: Vec<ContourRecord> = read_json(path)?;
    if records.is_empty() {
        return Err(CliError::schema(path, "no contours"));
    }
    let mut labels: Vec<&str> = records.iter().map(|r| r.condition.as_str()).collect();
    labels.dedup();
    let label = labels.join("+");
    let mut by_subject = BTreeMap::new();
    for rec in &records {
        if by_subject.insert(rec.subject.clone(), rec.clone()).is_some() {
            return Err(CliError::schema(path, format!("subject `{}` appears twice", rec.subject)));
        }
    }
    Ok((label, by_subject))
}

fn mean_sd(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.len() > 1).then(|| (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), sd)
}

pub fn build_report(
    (label_a, a): (String, BTreeMap<String, ContourRecord>),
    (label_b, b): (String, BTreeMap<String, ContourRecord>),
) -> Result<Report> {
    let only_a: Vec<String> = a.keys().filter(|k| !b.contains_key(*k)).cloned().collect();
    let only_b: Vec<String> = b.keys().filter(|k| !a.contains_key(*k)).cloned().collect();
    if !only_a.is_empty() || !only_b.is_empty() {
        return Err(CliError::SubjectMismatch { only_a, only_b });
    }
    let mut subjects = Vec::new();
    let mut excluded = Vec::new();
    let (mut areas_a, mut areas_b) = (Vec::new(), Vec::new());
    for (subject, ra) in &a {
        let rb = &b[subject];
        match (ra.area_mm2, rb.area_mm2) {
            (Some(x), Some(y)) if !ra.fully_censored && !rb.fully_censored => {
                areas_a.push(x);
                areas_b.push(y);
            }
            _ => excluded.push(subject.clone()),
        }
        subjects.push(SubjectRow {
            subject: subject.clone(),
            area_mm2: [ra.area_mm2, rb.area_mm2],
            centroid: [ra.centroid, rb.centroid],
            fully_censored: [ra.fully_censored, rb.fully_censored],
        });
    }
    let stats = |label: String, v: &[f64]| {
        let (mean, sd) = mean_sd(v);
        ConditionStats {
            label,
            n: v.len(),
            mean_area_mm2: mean,
            sd_area_mm2: sd,
        }
    };
    let (t_test, t_test_error) = match paired_t_test(&areas_a, &areas_b) {
        Ok(t) => (Some(t), None),
        Err(e @ (ThresholdError::DegenerateVariance | ThresholdError::InvalidInput(_))) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    Ok(Report {
        subjects,
        excluded,
        conditions: [stats(label_a, &areas_a), stats(label_b, &areas_b)],
        t_test,
        t_test_error,
    })
}

pub fn build_report_from_files(first: &Path, second: &Path) -> Result<Report> {
    build_report(load(first)?, load(second)?)
}

pub fn run(args: &ReportArgs, common: &Common) -> Result<Report> {
    let report = build_report_from_files(&args.first, &args.second)?;
    write_json(&common.out.join("report.json"), &report)?;
    for c in &report.conditions {
        match (c.mean_area_mm2, c.sd_area_mm2) {
            (Some(m), Some(s)) => println!("{}: n = {}, area {m:.2} ± {s:.2} mm²", c.label, c.n),
            _ => println!("{}: n = {}", c.label, c.n),
        }
    }
    match (&report.t_test, &report.t_test_error) {
        (Some(t), _) => println!("paired t({}) = {:.4}, p = {:.4}", t.df, t.t, t.p_two_sided),
        (None, Some(e)) => eprintln!("warning: no t-test: {e}"),
        (None, None) => {}
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(subject: &str, condition: &str, area: Option<f64>) -> ContourRecord {
        ContourRecord {
            subject: subject.into(),
            condition: condition.into(),
            p_target: 0.75,
            vertices: vec![],
            censored_angles: vec![],
            area_mm2: area,
            centroid: area.map(|_| [0.0, 0.0]),
            fully_censored: area.is_none(),
        }
    }

    fn set(condition: &str, areas: &[(&str, Option<f64>)]) -> (String, BTreeMap<String, ContourRecord>) {
        let map = areas
            .iter()
            .map(|(s, a)| (s.to_string(), rec(s, condition, *a)))
            .collect();
        (condition.to_string(), map)
    }

    #[test]
    fn known_areas_match_t_oracle() {
        let a = set("a", &[("p1", Some(1.0)), ("p2", Some(2.0)), ("p3", Some(3.0))]);
        let b = set("b", &[("p1", Some(2.0)), ("p2", Some(3.0)), ("p3", Some(5.0))]);
        let r = build_report(a, b).unwrap();
        let t = r.t_test.unwrap();
        assert!((t.t.abs() - 4.0).abs() < 1e-12);
        assert_eq!(t.df, 2.0);
        assert!((t.p_two_sided - 0.0572).abs() < 1e-3);
        assert_eq!(r.conditions[0].mean_area_mm2, Some(2.0));
        assert_eq!(r.conditions[0].sd_area_mm2, Some(1.0));
    }

    #[test]
    fn identical_conditions_surface_degenerate_variance() {
        let a = set("a", &[("p1", Some(1.0)), ("p2", Some(2.0))]);
        let r = build_report(a.clone(), a).unwrap();
        assert!(r.t_test.is_none());
        assert_eq!(r.t_test_error.as_deref(), Some("differences have zero variance"));
    }

    #[test]
    fn censored_subjects_are_excluded() {
        let a = set("a", &[("p1", Some(1.0)), ("p2", None), ("p3", Some(3.0)), ("p4", Some(4.0))]);
        let b = set("b", &[("p1", Some(2.0)), ("p2", Some(2.0)), ("p3", Some(5.0)), ("p4", Some(4.5))]);
        let r = build_report(a, b).unwrap();
        assert_eq!(r.excluded, vec!["p2"]);
        assert_eq!(r.conditions[1].n, 3);
        assert_eq!(r.t_test.unwrap().df, 2.0);
    }

    #[test]
    fn mismatched_subjects_are_rejected() {
        let a = set("a", &[("p1", Some(1.0)), ("p2", Some(2.0))]);
        let b = set("b", &[("p1", Some(1.0)), ("p3", Some(2.0))]);
        match build_report(a, b) {
            Err(CliError::SubjectMismatch { only_a, only_b }) => {
                assert_eq!(only_a, vec!["p2"]);
                assert_eq!(only_b, vec!["p3"]);
            }
            other => panic!("expected SubjectMismatch, got {other:?}"),
        }
    }
}
