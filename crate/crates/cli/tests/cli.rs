use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use wlr_cli::formats::{trials_csv, ContourRecord};
use wlr_core::normal;
use wlr_core::threshold::TrialRecord;

fn wlr(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wlr"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> Output {
    let o = wlr(out, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn fails_with(out: &Path, args: &[&str], needle: &str) {
    let o = wlr(out, args);
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(!o.status.success(), "{args:?} unexpectedly succeeded");
    assert!(stderr.contains(needle), "{args:?}: `{stderr}` lacks `{needle}`");
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn sweep_rows(dir: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("phi_deg,point_id,disparity_err_arcmin,visual_dir_err_arcmin,depth_err_diopters,skew_mm,fusible")
    );
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn simulate_zero_error_is_all_zero_on_81_samples() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["simulate", "--scenario", "ar-near", "--svg"]);
    let rows = sweep_rows(dir.path());
    assert_eq!(rows.len(), 81 * 3);
    let mut yaws: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    yaws.dedup();
    assert_eq!(yaws.len(), 81);
    assert_eq!((yaws[0], yaws[80]), ("-20", "20"));
    for r in &rows {
        for v in &r[2..6] {
            assert!(v.parse::<f64>().unwrap().abs() < 1e-9, "{r:?}");
        }
        assert_eq!(r[6], "true");
    }
    let summary = json(&dir.path().join("summary.json"));
    assert_eq!(summary["yaw_samples"], 81);
    assert!(fs::read_to_string(dir.path().join("sweep.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn simulate_fit_anchor_summary() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["simulate", "--scenario", "ar-near", "--mode", "fit", "--x-err", "-1.5", "--z-err", "-1.5"],
    );
    let s = json(&dir.path().join("summary.json"));
    assert_eq!(s["fixation_point_id"], "post-center");
    let disparity = s["fixation"]["max_abs_disparity_err_arcmin"].as_f64().unwrap();
    let vd = s["fixation"]["visual_dir_peak_to_peak_arcmin"].as_f64().unwrap();
    assert!((disparity - 4.0).abs() <= 1.5, "{disparity}");
    assert!((vd - 3.6).abs() <= 1.5, "{vd}");
    assert!(!dir.path().join("sweep.svg").exists());
}

#[test]
fn simulate_reads_scene_json_and_matches_preset() {
    let dir = tempfile::tempdir().unwrap();
    let (scene, _) = wlr_core::scenarios::build_scenario(wlr_core::scenarios::ScenarioPreset::ArFar);
    let scene_path = dir.path().join("scene.json");
    fs::write(&scene_path, serde_json::to_string(&scene).unwrap()).unwrap();
    let args = ["--mode", "tracking", "--x-err", "3", "--z-err", "-2", "--step", "5"];
    let from_file = dir.path().join("file");
    let from_preset = dir.path().join("preset");
    let mut a = vec!["simulate", "--scene", scene_path.to_str().unwrap()];
    a.extend(args);
    ok(&from_file, &a);
    let mut b = vec!["simulate", "--scenario", "ar-far"];
    b.extend(args);
    ok(&from_preset, &b);
    assert_eq!(
        fs::read(from_file.join("sweep.csv")).unwrap(),
        fs::read(from_preset.join("sweep.csv")).unwrap()
    );
}

#[test]
fn simulate_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    fails_with(dir.path(), &["simulate", "--scenario", "moon"], "unknown scenario preset");
    fails_with(dir.path(), &["simulate", "--scenario", "ar-near", "--step", "0"], "sweep step");
    fails_with(dir.path(), &["simulate", "--scenario", "ar-near", "--ipd", "-3"], "--ipd");
    fails_with(dir.path(), &["simulate", "--scenario", "ar-near", "--mode", "wobble"], "unknown error mode");
    fails_with(dir.path(), &["simulate"], "--scenario");
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"points":[{"id":"a","x":0,"y":0,"z":400}],"fixation":[0,0,500],"display_distance_mm":507}"#).unwrap();
    fails_with(dir.path(), &["simulate", "--scene", bad.to_str().unwrap()], "not one of the scene points");
}

fn observer_trials(subject: &str, a: f64, n: usize, seed: u64) -> Vec<TrialRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (x, z) = (rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0));
            let p = normal::cdf((f64::hypot(x, z) - a) / 2.0);
            TrialRecord::new(subject, "ar", x, z, rng.random::<f64>() < p)
        })
        .collect()
}

fn contours(dir: &Path) -> Vec<ContourRecord> {
    serde_json::from_str(&fs::read_to_string(dir.join("contours.json")).unwrap()).unwrap()
}

#[test]
fn fit_recovers_circular_observer_and_flags_censored_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut trials = observer_trials("P01", 8.0, 300, 1);
    trials.extend(observer_trials("P05", 30.0, 150, 2));
    let csv = dir.path().join("trials.csv");
    fs::write(&csv, trials_csv(&trials)).unwrap();
    let out = dir.path().join("out");
    ok(&out, &["fit", "--trials", csv.to_str().unwrap()]);
    let records = contours(&out);
    assert_eq!(records.len(), 2);

    let good = &records[0];
    assert_eq!((good.subject.as_str(), good.condition.as_str()), ("P01", "ar"));
    let r_star = 8.0 + 2.0 * normal::quantile(0.75);
    let area = good.area_mm2.unwrap();
    let analytic = std::f64::consts::PI * r_star * r_star;
    assert!((area / analytic - 1.0).abs() <= 0.35, "area {area} vs {analytic}");
    assert!(!good.fully_censored);
    assert_eq!(good.p_target, 0.75);

    let censored = &records[1];
    assert_eq!(censored.subject, "P05");
    assert!(censored.fully_censored);
    assert_eq!(censored.area_mm2, None);
    assert!(!censored.censored_angles.is_empty());
    for name in ["contour_P01_ar.svg", "contour_P05_ar.svg"] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn symmetric_data_gives_centred_contour() {
    let dir = tempfile::tempdir().unwrap();
    let mut trials = Vec::new();
    for t in observer_trials("P01", 8.0, 100, 4) {
        for (sx, sz) in [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
            trials.push(TrialRecord::new("P01", "ar", sx * t.x_err_mm, sz * t.z_err_mm, t.correct));
        }
    }
    let csv = dir.path().join("trials.csv");
    fs::write(&csv, trials_csv(&trials)).unwrap();
    ok(dir.path(), &["fit", "--trials", csv.to_str().unwrap()]);
    let [cx, cz] = contours(dir.path())[0].centroid.unwrap();
    assert!(cx.abs() < 1e-6 && cz.abs() < 1e-6, "centroid ({cx}, {cz})");
}

#[test]
fn fit_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    let header = "subject,condition,x_err_mm,z_err_mm,correct\n";
    for (name, text) in [
        ("empty.csv", String::new()),
        ("dup.csv", format!("{header}P01,ar,1,2,1\n{header}P01,ar,3,4,0\n")),
        ("short.csv", format!("{header}P01,ar,1,1\n")),
    ] {
        let path = dir.path().join(name);
        fs::write(&path, text).unwrap();
        fails_with(dir.path(), &["fit", "--trials", path.to_str().unwrap()], "schema error");
    }
    fails_with(dir.path(), &["fit", "--trials", "/nonexistent/trials.csv"], "/nonexistent/trials.csv");
}

#[test]
fn experiment_is_replayable_and_fills_budget() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let args = ["experiment", "--observer", "circular:a=8,s=2,lapse=0.05"];
    ok(&a, &[&args[..], &["--seed", "11"]].concat());
    ok(&b, &[&args[..], &["--seed", "11"]].concat());
    ok(&c, &[&args[..], &["--seed", "12"]].concat());
    let csv_a = fs::read(a.join("trials.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("trials.csv")).unwrap());
    assert_eq!(fs::read(a.join("contours.json")).unwrap(), fs::read(b.join("contours.json")).unwrap());
    assert_ne!(csv_a, fs::read(c.join("trials.csv")).unwrap());

    let text = String::from_utf8(csv_a).unwrap();
    assert_eq!(text.lines().count(), 1 + 110);
    assert!(text.starts_with("subject,condition,x_err_mm,z_err_mm,correct\n"));

    // The trials file is a valid `fit` input.
    let refit = dir.path().join("refit");
    ok(&refit, &["fit", "--trials", a.join("trials.csv").to_str().unwrap()]);
    assert_eq!(contours(&refit).len(), 1);
}

#[test]
fn experiment_rejects_bad_observers() {
    let dir = tempfile::tempdir().unwrap();
    fails_with(dir.path(), &["experiment", "--observer", "circular:a=8,s=2,lapse=0.5"], "lapse rate");
    fails_with(dir.path(), &["experiment", "--observer", "square:a=8,s=2"], "unknown observer shape");
    fails_with(dir.path(), &["experiment", "--observer", "circular:a=8"], "missing `s`");
    fails_with(
        dir.path(),
        &["experiment", "--observer", "circular:a=8,s=2", "--budget", "10"],
        "budget",
    );
}

fn contour_file(dir: &Path, name: &str, areas: &[(&str, f64)]) -> String {
    let records: Vec<ContourRecord> = areas
        .iter()
        .map(|(s, a)| {
            let r = (a / std::f64::consts::PI).sqrt();
            ContourRecord {
                subject: s.to_string(),
                condition: name.to_string(),
                p_target: 0.75,
                vertices: vec![[r, 0.0], [0.0, r], [-r, 0.0], [0.0, -r]],
                censored_angles: vec![],
                area_mm2: Some(*a),
                centroid: Some([0.0, 0.0]),
                fully_censored: false,
            }
        })
        .collect();
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, serde_json::to_string(&records).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn report_paired_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let a = contour_file(dir.path(), "fit", &[("P01", 1.0), ("P02", 2.0), ("P03", 3.0)]);
    let b = contour_file(dir.path(), "tracking", &[("P03", 5.0), ("P01", 2.0), ("P02", 3.0)]);
    ok(dir.path(), &["report", &a, &b]);
    let r = json(&dir.path().join("report.json"));
    assert!((r["t_test"]["t"].as_f64().unwrap().abs() - 4.0).abs() < 1e-12);
    assert_eq!(r["t_test"]["df"].as_f64(), Some(2.0));
    assert!((r["t_test"]["p_two_sided"].as_f64().unwrap() - 0.0572).abs() < 1e-3);
    assert_eq!(r["conditions"][0]["label"], "fit");
    assert_eq!(r["conditions"][1]["mean_area_mm2"].as_f64(), Some(10.0 / 3.0));
    assert_eq!(r["subjects"][2]["centroid"][0], serde_json::json!([0.0, 0.0]));
}

#[test]
fn report_surfaces_degenerate_variance_and_rejects_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let a = contour_file(dir.path(), "fit", &[("P01", 1.0), ("P02", 2.0)]);
    let o = ok(dir.path(), &["report", &a, &a]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("zero variance"));
    let r = json(&dir.path().join("report.json"));
    assert!(r["t_test"].is_null());
    assert_eq!(r["t_test_error"], "differences have zero variance");

    let b = contour_file(dir.path(), "tracking", &[("P01", 1.0), ("P09", 2.0)]);
    fails_with(dir.path(), &["report", &a, &b], "subject sets differ");
}

fn encoder_file(dir: &Path, rows: &[(f64, f64)]) -> String {
    let mut text = String::from("t_ms,angle_deg\n");
    for (t, a) in rows {
        text.push_str(&format!("{t},{a}\n"));
    }
    let path = dir.join("encoder.csv");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn predictions(dir: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(dir.join("predictions.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t_ms,angle_deg,target_t_ms,predicted_angle_deg"));
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn predict_ramp_is_shifted_by_slope_times_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<(f64, f64)> = (0..120).map(|i| (i as f64, 0.25 * i as f64 - 3.0)).collect();
    let input = encoder_file(dir.path(), &rows);
    ok(dir.path(), &["predict", "--input", &input]);
    let out = predictions(dir.path());
    assert_eq!(out.len(), 120);
    for (i, row) in out.iter().enumerate() {
        if i < 50 {
            assert_eq!(row[3], "");
        } else {
            let want = rows[i].1 + 0.25 * 26.0;
            assert!((row[3].parse::<f64>().unwrap() - want).abs() < 1e-10, "row {i}: {row:?}");
            assert_eq!(row[2].parse::<f64>().unwrap(), rows[i].0 + 26.0);
        }
    }
}

#[test]
fn predict_window_and_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<(f64, f64)> = (0..50).map(|i| (i as f64 * 2.0, i as f64)).collect();
    let input = encoder_file(dir.path(), &rows);
    ok(dir.path(), &["predict", "--input", &input]);
    assert!(predictions(dir.path()).iter().all(|r| r[3].is_empty()));

    let mut jittered: Vec<(f64, f64)> = (0..60).map(|i| (i as f64, 0.0)).collect();
    jittered[30].0 += 1e-4;
    let input = encoder_file(dir.path(), &jittered);
    fails_with(dir.path(), &["predict", "--input", &input], "not uniformly spaced");
    fails_with(dir.path(), &["predict", "--input", &input, "--window", "50"], "window must be odd");
}
