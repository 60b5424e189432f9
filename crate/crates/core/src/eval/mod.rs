//! Accuracy, confusion matrices, cross-validation, Cohen's kappa and
//! majority-vote ensembles.
//!
//! Everything here is single-threaded and order-deterministic so report
//! files are byte-stable.

mod report;

/// File helpers shared with run manifests.
pub mod report_io {
    pub use super::report::{write_file, write_json};
}

pub use report::{render_cv_report, render_report, ReportPaths, StudySummary};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::ClipMeta;
use crate::error::{Error, Result};
use crate::hash::salted_seed;
use crate::vlm::ResponseStatus;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub item: ClipMeta,
    pub truth: String,
    pub predicted: Option<String>,
    pub status: ResponseStatus,
    /// Model id or expert id.
    pub source: String,
}

impl PredictionRecord {
    /// Record for `item`; `predicted` must be present exactly when the status is ok.
    pub fn new(item: ClipMeta, predicted: Option<String>, status: ResponseStatus, source: impl Into<String>) -> Self {
        PredictionRecord { truth: item.category.clone(), item, predicted, status, source: source.into() }
    }

    /// Answered record with `label`.
    pub fn answered(item: ClipMeta, label: impl Into<String>, source: impl Into<String>) -> Self {
        Self::new(item, Some(label.into()), ResponseStatus::Ok, source)
    }

    pub fn is_correct(&self) -> bool {
        self.predicted.as_deref() == Some(self.truth.as_str())
    }
}

/// Which items the headline accuracy is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Accounting {
    /// Only items with an ok response.
    Answered,
    /// Every item; non-ok responses count as wrong.
    #[default]
    All,
}

impl FromStr for Accounting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "answered" => Ok(Accounting::Answered),
            "all" => Ok(Accounting::All),
            o => Err(Error::Config(format!("unknown accounting `{o}` (answered, all)"))),
        }
    }
}

impl fmt::Display for Accounting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Accounting::Answered => "answered",
            Accounting::All => "all",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub n_items: usize,
    pub n_answered: usize,
    pub n_correct: usize,
    pub accuracy_answered: f64,
    pub accuracy_all: f64,
    pub classes: Vec<String>,
    /// `confusion[truth][predicted]` over answered items, indexed by class order.
    pub confusion: Vec<Vec<u64>>,
    /// Correct over all items of each true class.
    pub per_class_accuracy: BTreeMap<String, f64>,
    pub status_counts: BTreeMap<String, usize>,
}

impl EvalResult {
    pub fn accuracy(&self, accounting: Accounting) -> f64 {
        match accounting {
            Accounting::Answered => self.accuracy_answered,
            Accounting::All => self.accuracy_all,
        }
    }

    pub fn trace(&self) -> u64 {
        (0..self.confusion.len()).map(|i| self.confusion[i][i]).sum()
    }
}

fn status_key(s: ResponseStatus) -> &'static str {
    match s {
        ResponseStatus::Ok => "ok",
        ResponseStatus::Unparseable => "unparseable",
        ResponseStatus::Refused => "refused",
        ResponseStatus::TransportError => "transport_error",
    }
}

pub fn evaluate(records: &[PredictionRecord], classes: &[String]) -> Result<EvalResult> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no prediction records".into()));
    }
    let index: HashMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let n = classes.len();
    let mut confusion = vec![vec![0u64; n]; n];
    let mut class_items = vec![0usize; n];
    let mut class_correct = vec![0usize; n];
    let mut status_counts = BTreeMap::new();
    let (mut answered, mut correct) = (0usize, 0usize);
    for r in records {
        let t = *index
            .get(r.truth.as_str())
            .ok_or_else(|| Error::Validation(format!("truth `{}` of {} is not a task class", r.truth, r.item.filename)))?;
        class_items[t] += 1;
        *status_counts.entry(status_key(r.status).to_string()).or_insert(0) += 1;
        match (&r.predicted, r.status) {
            (Some(p), ResponseStatus::Ok) => {
                let pi = *index.get(p.as_str()).ok_or_else(|| {
                    Error::Validation(format!("prediction `{p}` for {} is not a task class", r.item.filename))
                })?;
                confusion[t][pi] += 1;
                answered += 1;
                if pi == t {
                    correct += 1;
                    class_correct[t] += 1;
                }
            }
            (None, s) if s != ResponseStatus::Ok => {}
            _ => {
                return Err(Error::Validation(format!(
                    "record for {} has status {} but prediction {:?}",
                    r.item.filename,
                    status_key(r.status),
                    r.predicted
                )))
            }
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let per_class_accuracy = classes
        .iter()
        .enumerate()
        .filter(|&(i, _)| class_items[i] > 0)
        .map(|(i, c)| (c.clone(), ratio(class_correct[i], class_items[i])))
        .collect();
    Ok(EvalResult {
        n_items: records.len(),
        n_answered: answered,
        n_correct: correct,
        accuracy_answered: ratio(correct, answered),
        accuracy_all: ratio(correct, records.len()),
        classes: classes.to_vec(),
        confusion,
        per_class_accuracy,
        status_counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: u8,
    pub result: EvalResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub folds: Vec<FoldResult>,
    /// Evaluation of all folds' records pooled together.
    pub pooled: EvalResult,
}

/// Runs `run_fn` per fold and pools the records.
pub fn cross_validate<F>(mut run_fn: F, folds: &[u8], classes: &[String]) -> Result<CrossValidation>
where
    F: FnMut(u8) -> Result<Vec<PredictionRecord>>,
{
    let mut per_fold = Vec::with_capacity(folds.len());
    let mut all = Vec::new();
    for &fold in folds {
        let records = run_fn(fold)?;
        if let Some(r) = records.iter().find(|r| r.item.fold != fold) {
            return Err(Error::Validation(format!("fold {fold} run returned item {} from fold {}", r.item.filename, r.item.fold)));
        }
        per_fold.push(FoldResult { fold, result: evaluate(&records, classes)? });
        all.extend(records);
    }
    Ok(CrossValidation { folds: per_fold, pooled: evaluate(&all, classes)? })
}

/// Cohen's kappa between two label sequences, computed on integer counts:
/// κ = (n·agree − Σ a_c·b_c) / (n² − Σ a_c·b_c).
pub fn cohen_kappa_labels<S: AsRef<str>>(a: &[S], b: &[S]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Alignment(format!("{} vs {} labels", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("no labels to compare".into()));
    }
    let n = a.len() as i128;
    let mut ca: HashMap<&str, i128> = HashMap::new();
    let mut cb: HashMap<&str, i128> = HashMap::new();
    let mut agree = 0i128;
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (x.as_ref(), y.as_ref());
        *ca.entry(x).or_insert(0) += 1;
        *cb.entry(y).or_insert(0) += 1;
        agree += (x == y) as i128;
    }
    let chance: i128 = ca.iter().map(|(k, &v)| v * cb.get(k).copied().unwrap_or(0)).sum();
    let denom = n * n - chance;
    if denom == 0 {
        // chance agreement is total: both annotators used one identical label
        return if agree == n {
            Ok(1.0)
        } else {
            Err(Error::Degenerate("chance agreement is 1 but labels differ".into()))
        };
    }
    Ok((n * agree - chance) as f64 / denom as f64)
}

fn answered_labels<'a>(records: &'a [PredictionRecord], who: &str) -> Result<HashMap<&'a str, &'a str>> {
    let mut out = HashMap::with_capacity(records.len());
    for r in records {
        let label = r
            .predicted
            .as_deref()
            .ok_or_else(|| Error::Validation(format!("{who} did not answer {}", r.item.filename)))?;
        if out.insert(r.item.filename.as_str(), label).is_some() {
            return Err(Error::Alignment(format!("{who} answered {} twice", r.item.filename)));
        }
    }
    Ok(out)
}

/// Kappa between two fully answered record sets over the same items.
pub fn cohen_kappa(a: &[PredictionRecord], b: &[PredictionRecord]) -> Result<f64> {
    let la = answered_labels(a, "annotator a")?;
    let lb = answered_labels(b, "annotator b")?;
    if la.len() != lb.len() {
        return Err(Error::Alignment(format!("{} vs {} items", la.len(), lb.len())));
    }
    let mut items: Vec<&str> = la.keys().copied().collect();
    items.sort_unstable();
    let mut xs = Vec::with_capacity(items.len());
    let mut ys = Vec::with_capacity(items.len());
    for item in items {
        let y = lb.get(item).ok_or_else(|| Error::Alignment(format!("item {item} missing from annotator b")))?;
        xs.push(la[item]);
        ys.push(*y);
    }
    cohen_kappa_labels(&xs, &ys)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSummary {
    pub sources: Vec<String>,
    /// Symmetric matrix with ones on the diagonal.
    pub matrix: Vec<Vec<f64>>,
    /// Unweighted mean over unordered pairs.
    pub mean: f64,
}

pub fn mean_pairwise_kappa(annotators: &[Vec<PredictionRecord>]) -> Result<KappaSummary> {
    let m = annotators.len();
    if m < 2 {
        return Err(Error::InsufficientData("pairwise kappa needs at least two annotators".into()));
    }
    let mut matrix = vec![vec![1.0; m]; m];
    let mut sum = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            let k = cohen_kappa(&annotators[i], &annotators[j])?;
            matrix[i][j] = k;
            matrix[j][i] = k;
            sum += k;
        }
    }
    let sources = annotators
        .iter()
        .map(|a| a.first().map(|r| r.source.clone()).unwrap_or_default())
        .collect();
    Ok(KappaSummary { sources, matrix, mean: sum / (m * (m - 1) / 2) as f64 })
}

pub const ENSEMBLE_SOURCE: &str = "ensemble";

/// Per-item modal label over aligned annotator record sets.
///
/// Abstentions vote as their own option. Ties are broken by a uniform draw
/// among the tied options, seeded per item from `seed` and the item's file
/// name so the result does not depend on item order.
pub fn ensemble_majority(annotations: &[Vec<PredictionRecord>], seed: u64) -> Result<Vec<PredictionRecord>> {
    if annotations.len() < 2 {
        return Err(Error::InsufficientData("ensemble needs at least two annotators".into()));
    }
    let base = &annotations[0];
    let lookups: Vec<HashMap<&str, &PredictionRecord>> = annotations
        .iter()
        .map(|a| a.iter().map(|r| (r.item.filename.as_str(), r)).collect())
        .collect();
    for (i, l) in lookups.iter().enumerate() {
        if l.len() != base.len() || annotations[i].len() != base.len() {
            return Err(Error::Alignment(format!("annotator {i} covers {} items, expected {}", l.len(), base.len())));
        }
    }
    let mut out = Vec::with_capacity(base.len());
    for item in base {
        let mut votes: BTreeMap<Option<&str>, usize> = BTreeMap::new();
        for (i, l) in lookups.iter().enumerate() {
            let r = l
                .get(item.item.filename.as_str())
                .ok_or_else(|| Error::Alignment(format!("annotator {i} lacks item {}", item.item.filename)))?;
            *votes.entry(r.predicted.as_deref()).or_insert(0) += 1;
        }
        let top = votes.values().copied().max().unwrap_or(0);
        let tied: Vec<Option<&str>> = votes.iter().filter(|(_, &v)| v == top).map(|(k, _)| *k).collect();
        let winner = if tied.len() == 1 {
            tied[0]
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(salted_seed(&item.item.filename, seed));
            tied[rng.gen_range(0..tied.len())]
        };
        let status = if winner.is_some() { ResponseStatus::Ok } else { ResponseStatus::Unparseable };
        out.push(PredictionRecord::new(item.item.clone(), winner.map(str::to_string), status, ENSEMBLE_SOURCE));
    }
    Ok(out)
}
