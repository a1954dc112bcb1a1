use std::path::Path;

use serde::{Deserialize, Serialize};

use super::charts::emit_charts;
use super::{BenchOutcome, BenchRow};
use crate::error::{Error, Result};

pub const REPORT_COLUMNS: [&str; 9] = [
    "dataset",
    "technique",
    "mean_f1",
    "vmr",
    "train_ms",
    "infer_ms_per_1k",
    "improvement_pct",
    "reps",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

/// `x` rounded to 6 significant digits.
pub fn round_sig6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

/// Shortest decimal text of `round_sig6(x)`.
pub fn fmt_sig6(x: f64) -> String {
    let r = round_sig6(x);
    if r == 0.0 {
        "0".into()
    } else {
        r.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig6).unwrap_or_default()
}

fn rounded(rows: &[BenchRow]) -> Vec<BenchRow> {
    rows.iter()
        .map(|r| BenchRow {
            mean_f1: r.mean_f1.map(round_sig6),
            vmr: r.vmr.map(round_sig6),
            train_ms: r.train_ms.map(round_sig6),
            infer_ms_per_1k: r.infer_ms_per_1k.map(round_sig6),
            improvement_pct: r.improvement_pct.map(round_sig6),
            ..r.clone()
        })
        .collect()
}

pub fn emit_report(rows: &[BenchRow], format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("no rows to report".into()));
    }
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_path(path)?;
            w.write_record(REPORT_COLUMNS)?;
            for r in rows {
                w.write_record([
                    r.dataset.clone(),
                    r.technique.clone(),
                    opt(r.mean_f1),
                    opt(r.vmr),
                    opt(r.train_ms),
                    opt(r.infer_ms_per_1k),
                    opt(r.improvement_pct),
                    r.reps.to_string(),
                    r.status.clone(),
                ])?;
            }
            w.flush()?;
        }
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(&rounded(rows))?;
            text.push('\n');
            std::fs::write(path, text)?;
        }
    }
    Ok(())
}

fn parse_opt(cell: &str) -> Result<Option<f64>> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse()
        .map(Some)
        .map_err(|_| Error::Csv(format!("not a number: {cell:?}")))
}

pub fn read_rows_csv(path: impl AsRef<Path>) -> Result<Vec<BenchRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().ne(REPORT_COLUMNS.iter().copied()) {
        return Err(Error::Csv(format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        rows.push(BenchRow {
            dataset: rec[0].to_string(),
            technique: rec[1].to_string(),
            mean_f1: parse_opt(&rec[2])?,
            vmr: parse_opt(&rec[3])?,
            train_ms: parse_opt(&rec[4])?,
            infer_ms_per_1k: parse_opt(&rec[5])?,
            improvement_pct: parse_opt(&rec[6])?,
            reps: rec[7]
                .parse()
                .map_err(|_| Error::Csv(format!("bad reps {:?}", &rec[7])))?,
            status: rec[8].to_string(),
        });
    }
    Ok(rows)
}

pub fn read_rows_json(path: impl AsRef<Path>) -> Result<Vec<BenchRow>> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Writes `report.csv`, `report.json`, `timings.csv` and both charts into `dir`.
pub fn write_outputs(outcome: &BenchOutcome, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    emit_report(&outcome.rows, ReportFormat::Csv, dir.join("report.csv"))?;
    emit_report(&outcome.rows, ReportFormat::Json, dir.join("report.json"))?;
    let mut w = csv::Writer::from_path(dir.join("timings.csv"))?;
    w.write_record([
        "dataset",
        "technique",
        "train_ms_mean",
        "train_ms_median",
        "infer_ms_per_1k_mean",
        "infer_ms_per_1k_median",
    ])?;
    for t in &outcome.timings {
        w.write_record([
            t.dataset.clone(),
            t.technique.clone(),
            fmt_sig6(t.train_ms_mean),
            fmt_sig6(t.train_ms_median),
            fmt_sig6(t.infer_ms_per_1k_mean),
            fmt_sig6(t.infer_ms_per_1k_median),
        ])?;
    }
    w.flush()?;
    emit_charts(&outcome.rows, dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(t: &str, f1: Option<f64>, imp: Option<f64>) -> BenchRow {
        BenchRow {
            dataset: "d".into(),
            technique: t.into(),
            mean_f1: f1,
            vmr: f1.map(|_| 0.001234567),
            train_ms: f1.map(|_| 12.3456789),
            infer_ms_per_1k: f1.map(|_| 0.5),
            improvement_pct: imp,
            reps: 3,
            status: if f1.is_some() { "ok".into() } else { "n/a: NoBoundarySamples".into() },
        }
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(fmt_sig6(0.76637467), "0.766375");
        assert_eq!(fmt_sig6(12.3456789), "12.3457");
        assert_eq!(fmt_sig6(0.0), "0");
        assert_eq!(fmt_sig6(-0.0), "0");
        assert_eq!(fmt_sig6(1234567.0), "1234570");
        assert_eq!(fmt_sig6(1e-7), "0.0000001");
    }

    #[test]
    fn single_row_csv_has_two_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        emit_report(&[row("baseline", Some(0.5), Some(0.0))], ReportFormat::Csv, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], REPORT_COLUMNS.join(","));
        assert_eq!(lines[1], "d,baseline,0.5,0.00123457,12.3457,0.5,0,3,ok");
        assert!(emit_report(&[], ReportFormat::Csv, &p).is_err());
    }

    #[test]
    fn json_csv_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            row("baseline", Some(0.61234567), Some(0.0)),
            row("adasyn", None, None),
            row("rus", Some(0.7), Some(14.31234567)),
        ];
        let j = dir.path().join("a.json");
        let c = dir.path().join("b.csv");
        let j2 = dir.path().join("c.json");
        emit_report(&rows, ReportFormat::Json, &j).unwrap();
        let from_json = read_rows_json(&j).unwrap();
        emit_report(&from_json, ReportFormat::Csv, &c).unwrap();
        let from_csv = read_rows_csv(&c).unwrap();
        assert_eq!(from_json, from_csv);
        emit_report(&from_csv, ReportFormat::Json, &j2).unwrap();
        assert_eq!(std::fs::read(&j).unwrap(), std::fs::read(&j2).unwrap());
    }

    proptest! {
        #[test]
        fn sig6_is_idempotent_and_close(x in -1e9f64..1e9) {
            let r = round_sig6(x);
            prop_assert_eq!(round_sig6(r), r);
            prop_assert_eq!(fmt_sig6(x).parse::<f64>().unwrap(), if r == 0.0 { 0.0 } else { r });
            prop_assert!((r - x).abs() <= 5e-6 * x.abs() + 1e-300);
        }
    }
}
