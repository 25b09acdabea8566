//! On-disk formats: trials CSV, contour JSON and generic file helpers.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use wlr_core::threshold::{ThresholdContour, TrialRecord};

use crate::error::{CliError, Result};

pub const TRIALS_HEADER: [&str; 5] = ["subject", "condition", "x_err_mm", "z_err_mm", "correct"];

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Builds CSV text with LF line endings from already formatted rows.
pub fn csv_text<I, R>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(row).expect("writing to memory");
    }
    w.into_inner().expect("flushing to memory")
}

/// Empty string for a missing value.
pub fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Reads a headed CSV, checking the header exactly and rejecting empty
/// files, repeated header rows and rows of the wrong width.
pub fn read_csv_rows(path: &Path, header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let first = match records.next() {
        None => return Err(CliError::schema(path, "file is empty")),
        Some(r) => r.map_err(|e| CliError::schema(path, e.to_string()))?,
    };
    if first.iter().ne(header.iter().copied()) {
        return Err(CliError::schema(
            path,
            format!("expected header `{}`, got `{}`", header.join(","), first.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut rows = Vec::new();
    for record in records {
        let record = record.map_err(|e| CliError::schema(path, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.iter().eq(header.iter().copied()) {
            return Err(CliError::schema(path, format!("line {line}: duplicate header row")));
        }
        if record.len() != header.len() {
            return Err(CliError::schema(
                path,
                format!("line {line}: expected {} fields, got {}", header.len(), record.len()),
            ));
        }
        rows.push((line, record));
    }
    if rows.is_empty() {
        return Err(CliError::schema(path, "no data rows"));
    }
    Ok(rows)
}

pub fn parse_f64(path: &Path, line: u64, column: &str, value: &str) -> Result<f64> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(CliError::schema(
            path,
            format!("line {line}: `{column}` must be a finite number, got `{value}`"),
        )),
    }
}

fn parse_correct(path: &Path, line: u64, value: &str) -> Result<bool> {
    match value {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        _ => Err(CliError::schema(
            path,
            format!("line {line}: `correct` must be 0/1 or true/false, got `{value}`"),
        )),
    }
}

pub fn read_trials(path: &Path) -> Result<Vec<TrialRecord>> {
    read_csv_rows(path, &TRIALS_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            if r[0].is_empty() || r[1].is_empty() {
                return Err(CliError::schema(path, format!("line {line}: empty subject or condition")));
            }
            Ok(TrialRecord::new(
                &r[0],
                &r[1],
                parse_f64(path, line, "x_err_mm", &r[2])?,
                parse_f64(path, line, "z_err_mm", &r[3])?,
                parse_correct(path, line, &r[4])?,
            ))
        })
        .collect()
}

pub fn trials_csv(trials: &[TrialRecord]) -> Vec<u8> {
    csv_text(
        &TRIALS_HEADER,
        trials.iter().map(|t| {
            [
                t.subject.clone(),
                t.condition.clone(),
                t.x_err_mm.to_string(),
                t.z_err_mm.to_string(),
                u8::from(t.correct).to_string(),
            ]
        }),
    )
}

/// One fitted contour. `censored_angles` are in radians; a fully censored
/// contour keeps its partial vertices and has no area or centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourRecord {
    pub subject: String,
    pub condition: String,
    pub p_target: f64,
    pub vertices: Vec<[f64; 2]>,
    pub censored_angles: Vec<f64>,
    pub area_mm2: Option<f64>,
    pub centroid: Option<[f64; 2]>,
    pub fully_censored: bool,
}

impl ContourRecord {
    pub fn new(subject: &str, condition: &str, contour: &ThresholdContour) -> Self {
        Self {
            subject: subject.to_string(),
            condition: condition.to_string(),
            p_target: contour.p_target,
            vertices: contour.vertices_mm(),
            censored_angles: contour.censored_angles.clone(),
            area_mm2: contour.area_mm2,
            centroid: contour.centroid,
            fully_censored: contour.fully_censored,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn temp_file(name: &str, text: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        fs::write(&path, text).unwrap();
        (dir, path)
    }

    #[test]
    fn json_floats_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.json");
        let values: Vec<f64> = (1..2000).map(|i| (i as f64 * 0.7311).sin() * 10f64.powi(i % 7 - 3)).collect();
        write_json(&path, &values).unwrap();
        assert_eq!(read_json::<Vec<f64>>(&path).unwrap(), values);
    }

    #[test]
    fn trials_round_trip() {
        let trials = vec![
            TrialRecord::new("P01", "ar", 1.25, -0.1 + 0.2, true),
            TrialRecord::new("P01", "ar", -14.999999999, 3.0, false),
        ];
        let (_dir, path) = temp_file("t.csv", std::str::from_utf8(&trials_csv(&trials)).unwrap());
        assert_eq!(read_trials(&path).unwrap(), trials);
    }

    #[test]
    fn schema_errors() {
        let header = "subject,condition,x_err_mm,z_err_mm,correct\n";
        for (text, needle) in [
            ("", "file is empty"),
            (header, "no data rows"),
            ("subject,condition,x,z,correct\nP,c,1,2,1\n", "expected header"),
            (&format!("{header}P,c,1,2,1\n{header}"), "duplicate header"),
            (&format!("{header}P,c,1,2\n"), "expected 5 fields"),
            (&format!("{header}P,c,one,2,1\n"), "`x_err_mm` must be a finite number"),
            (&format!("{header}P,c,1,NaN,1\n"), "`z_err_mm` must be a finite number"),
            (&format!("{header}P,c,1,2,yes\n"), "`correct`"),
            (&format!("{header},c,1,2,1\n"), "empty subject"),
        ] {
            let (_dir, path) = temp_file("t.csv", text);
            match read_trials(&path) {
                Err(CliError::Schema { message, .. }) => assert!(message.contains(needle), "{message} lacks {needle}"),
                other => panic!("{text:?}: expected schema error, got {other:?}"),
            }
        }
    }

    #[test]
    fn csv_uses_lf_and_empty_missing_fields() {
        let text = csv_text(&["a", "b"], [[opt(Some(1.5)), opt(None)]]);
        assert_eq!(text, b"a,b\n1.5,\n");
    }
}
