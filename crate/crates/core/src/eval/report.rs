//! Report documents: structured summary, plain-text confusion table and a
//! confusion heatmap.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{Accounting, CrossValidation, EvalResult, KappaSummary};
use crate::dsp::ColormapName;
use crate::error::{Error, Result};
use crate::render::render_heatmap;

const HEATMAP_CELL_PX: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub summary: PathBuf,
    pub confusion_txt: PathBuf,
    pub confusion_png: PathBuf,
}

#[derive(Serialize)]
struct Summary<'a> {
    accounting: Accounting,
    headline_accuracy: f64,
    #[serde(flatten)]
    result: &'a EvalResult,
}

#[derive(Serialize)]
struct CvSummary<'a> {
    accounting: Accounting,
    headline_accuracy: f64,
    fold_accuracies: Vec<(u8, f64)>,
    #[serde(flatten)]
    cv: &'a CrossValidation,
}

/// Human-study aggregate: per-expert results, agreement and the ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySummary {
    pub accounting: Accounting,
    pub experts: Vec<(String, EvalResult)>,
    pub kappa: KappaSummary,
    pub ensemble: EvalResult,
    pub ensemble_rule: String,
    pub tie_break_seed: u64,
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

/// Fixed-width confusion table with row totals; rows are true classes.
pub fn confusion_table(result: &EvalResult) -> String {
    let width = result.classes.iter().map(String::len).max().unwrap_or(4).max(5);
    let cell = result.confusion.iter().flatten().map(|v| v.to_string().len()).max().unwrap_or(1).max(3);
    let mut out = String::new();
    let _ = write!(out, "{:<width$}", "truth\\pred");
    for i in 0..result.classes.len() {
        let _ = write!(out, " {:>cell$}", i);
    }
    let _ = writeln!(out, " {:>cell$}", "sum");
    for (i, (class, row)) in result.classes.iter().zip(&result.confusion).enumerate() {
        let _ = write!(out, "{:<width$}", format!("{i}:{class}"));
        for v in row {
            let _ = write!(out, " {:>cell$}", v);
        }
        let _ = writeln!(out, " {:>cell$}", row.iter().sum::<u64>());
    }
    out
}

fn write_confusion(result: &EvalResult, dest: &Path) -> Result<(PathBuf, PathBuf)> {
    let txt = dest.join("confusion.txt");
    write_file(&txt, confusion_table(result).as_bytes())?;
    let png = dest.join("confusion.png");
    write_file(&png, &render_heatmap(&result.confusion, HEATMAP_CELL_PX, ColormapName::Viridis)?)?;
    Ok((txt, png))
}

/// Writes `summary.json`, `confusion.txt` and `confusion.png` under `dest`.
pub fn render_report(result: &EvalResult, accounting: Accounting, dest: &Path) -> Result<ReportPaths> {
    let summary = dest.join("summary.json");
    write_json(&summary, &Summary { accounting, headline_accuracy: result.accuracy(accounting), result })?;
    let (confusion_txt, confusion_png) = write_confusion(result, dest)?;
    Ok(ReportPaths { summary, confusion_txt, confusion_png })
}

/// Cross-validation variant; the confusion files show the pooled matrix.
pub fn render_cv_report(cv: &CrossValidation, accounting: Accounting, dest: &Path) -> Result<ReportPaths> {
    let summary = dest.join("summary.json");
    let doc = CvSummary {
        accounting,
        headline_accuracy: cv.pooled.accuracy(accounting),
        fold_accuracies: cv.folds.iter().map(|f| (f.fold, f.result.accuracy(accounting))).collect(),
        cv,
    };
    write_json(&summary, &doc)?;
    let (confusion_txt, confusion_png) = write_confusion(&cv.pooled, dest)?;
    Ok(ReportPaths { summary, confusion_txt, confusion_png })
}

impl StudySummary {
    pub fn write(&self, dest: &Path) -> Result<ReportPaths> {
        let summary = dest.join("summary.json");
        write_json(&summary, self)?;
        let (confusion_txt, confusion_png) = write_confusion(&self.ensemble, dest)?;
        Ok(ReportPaths { summary, confusion_txt, confusion_png })
    }
}
