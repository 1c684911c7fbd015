//! Report files: report.json, metrics.csv, curves.csv and per-fold training logs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::pipeline::{CvReport, OofPrediction, Task};
use crate::train::format_epoch;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("report file is not valid JSON for the schema: {0}")]
    Parse(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    fs::write(path, contents).map_err(io_err(path))
}

/// `%g`-style formatting with six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        return format!("{mantissa}e{exp}");
    }
    let decimals = (5 - exp) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), sig6)
}

/// `auc1` for a one-year horizon, `auc2.5` otherwise.
fn auc_column(h: f64) -> String {
    format!("auc{}", sig6(h))
}

pub fn metrics_csv(report: &CvReport) -> String {
    let mut out = String::from("repeat,fold,task,cindex,ibs");
    for &h in &report.config.eval.horizons {
        out.push(',');
        out.push_str(&auc_column(h));
    }
    out.push_str(",mae\n");
    for r in &report.rows {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            r.repeat,
            r.fold,
            r.task.name(),
            cell(r.cindex),
            cell(r.ibs)
        );
        for a in &r.auc {
            out.push(',');
            out.push_str(&cell(*a));
        }
        let _ = writeln!(out, ",{}", cell(r.mae));
    }
    out
}

/// Curves of the first repeat, in which every patient is held out exactly once.
pub fn curves_csv(predictions: &[OofPrediction]) -> String {
    let mut first: Vec<&OofPrediction> = predictions.iter().filter(|p| p.repeat == 0).collect();
    first.sort_by_key(|p| p.patient);
    curve_rows(first.iter().map(|p| (p.patient_id.as_str(), &p.prediction)))
}

pub fn curve_rows<'a>(rows: impl Iterator<Item = (&'a str, &'a crate::model::Prediction)>) -> String {
    let mut out = String::from("patient_id,task,bin,hazard,survival\n");
    for (id, p) in rows {
        for task in Task::ALL {
            let (h, s) = match task {
                Task::Os => (&p.os_hazard, &p.os_survival),
                Task::Dfs => (&p.dfs_hazard, &p.dfs_survival),
            };
            for (k, (hv, sv)) in h.0.iter().zip(&s.0).enumerate() {
                let _ = writeln!(out, "{id},{},{k},{},{}", task.name(), sig6(*hv), sig6(*sv));
            }
        }
    }
    out
}

/// Writes every report file under `dir` and returns the paths written.
pub fn emit_report(report: &CvReport, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let logs = dir.join("logs");
    fs::create_dir_all(&logs).map_err(io_err(&logs))?;
    let mut written = Vec::new();
    let mut put = |path: PathBuf, text: String| -> Result<(), ReportError> {
        write_file(&path, &text)?;
        written.push(path);
        Ok(())
    };
    put(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    put(dir.join("metrics.csv"), metrics_csv(report))?;
    put(dir.join("curves.csv"), curves_csv(&report.predictions))?;
    for f in &report.folds {
        let text: String = f.history.iter().map(|e| format_epoch(e) + "\n").collect();
        put(logs.join(format!("repeat{}_fold{}.log", f.repeat, f.fold)), text)?;
    }
    Ok(written)
}

pub fn read_report(path: &Path) -> Result<CvReport, ReportError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

/// Human-readable aggregate table.
pub fn summary_text(report: &CvReport) -> String {
    let mut out = format!(
        "variant {} | folds {} ({} failed) | {:.1}s\n",
        report.variant,
        report.folds.len(),
        report.failed_folds(),
        report.runtime_secs
    );
    let pm = |s: &crate::pipeline::Summary| match (s.mean, s.std) {
        (Some(m), Some(sd)) => format!("{m:.3}±{sd:.3}"),
        (Some(m), None) => format!("{m:.3}"),
        _ => "NA".into(),
    };
    for a in &report.aggregate {
        let _ = write!(
            out,
            "{:>3}  cindex {}  ibs {}",
            a.task.name(),
            pm(&a.cindex),
            pm(&a.ibs)
        );
        for (h, s) in report.config.eval.horizons.iter().zip(&a.auc) {
            let _ = write!(out, "  {} {}", auc_column(*h), pm(s));
        }
        let _ = writeln!(out, "  mae {}", pm(&a.mae));
    }
    for b in &report.bootstrap {
        if let Some(text) = &b.text {
            let _ = writeln!(out, "{:>3}  pooled cindex {text}", b.task.name());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::pipeline::{FoldRecord, FoldStatus, MetricRow, Variant};

    fn empty_report() -> CvReport {
        CvReport {
            variant: Variant::Full,
            seed: 1,
            config: RunConfig::default(),
            folds: Vec::new(),
            rows: Vec::new(),
            aggregate: Vec::new(),
            bootstrap: Vec::new(),
            cascade_gradient_norm: 0.0,
            predictions: Vec::new(),
            runtime_secs: 0.5,
        }
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.7123456789), "0.712346");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(999999.7), "1e6");
        assert_eq!(sig6(-0.5), "-0.5");
        assert_eq!(sig6(1.5e-7), "1.5e-7");
        assert_eq!(sig6(0.0001), "0.0001");
        assert_eq!(sig6(0.0), "0");
    }

    #[test]
    fn empty_report_has_header_only_csv() {
        let r = empty_report();
        assert_eq!(metrics_csv(&r), "repeat,fold,task,cindex,ibs,auc1,auc3,auc5,mae\n");
        assert_eq!(curves_csv(&r.predictions), "patient_id,task,bin,hazard,survival\n");
    }

    #[test]
    fn missing_values_are_marked() {
        let mut r = empty_report();
        r.folds.push(FoldRecord {
            repeat: 0,
            fold: 2,
            seed: 9,
            n_train: 1,
            n_validation: 1,
            n_test: 1,
            status: FoldStatus::Failed { reason: "x".into() },
            history: Vec::new(),
        });
        r.rows.push(MetricRow {
            repeat: 0,
            fold: 2,
            task: Task::Os,
            cindex: Some(0.5),
            ibs: None,
            auc: vec![None, Some(1.0), None],
            mae: None,
            capped_weights: 0,
        });
        let csv = metrics_csv(&r);
        assert_eq!(csv.lines().nth(1).unwrap(), "0,2,os,0.5,NA,NA,1,NA,NA");
    }

    #[test]
    fn json_round_trips_and_files_are_written() {
        let mut r = empty_report();
        r.runtime_secs = 0.1 + 0.2;
        let dir = tempfile::tempdir().unwrap();
        let written = emit_report(&r, dir.path()).unwrap();
        assert_eq!(written.len(), 3);
        assert_eq!(read_report(&dir.path().join("report.json")).unwrap(), r);
    }

    #[test]
    fn unwritable_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        assert!(matches!(
            emit_report(&empty_report(), &blocker.join("sub")),
            Err(ReportError::Io { .. })
        ));
    }
}
