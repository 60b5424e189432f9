//! Run manifests and the exemplar/test partition audit.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::dataset::ClipMeta;
use crate::dsp::{SpectrogramConfig, DSP_DECISIONS};
use crate::error::{Error, Result};
use crate::eval::Accounting;
use crate::exemplars::ExemplarSet;
use crate::hash::short_hash;
use crate::render::{config_hash, Layout, RENDERER_VERSION};
use crate::vlm::{ParseOptions, RetryPolicy, PROMPT_TEMPLATE_VERSION};

pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    /// `esc10` or `esc50-subset`.
    pub view: String,
    pub manifest_path: String,
    pub manifest_sha256: String,
    pub n_rows: usize,
    pub subset_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    /// Exemplar selection (random draw and K-means initialisation).
    pub selection: u64,
    pub subset: u64,
    pub tie_break: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub retry: RetryPolicy,
    pub refusal_phrases: Vec<String>,
    pub salvage: bool,
}

impl SamplingParams {
    pub fn new(retry: RetryPolicy, parse: &ParseOptions) -> Self {
        SamplingParams {
            temperature: 0.0,
            retry,
            refusal_phrases: parse.refusal_phrases.clone(),
            salvage: parse.salvage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRun {
    pub test_fold: u8,
    pub test_items: Vec<ClipMeta>,
    pub exemplars: Option<ExemplarSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub tool_version: String,
    pub dataset: DatasetDescriptor,
    pub config: SpectrogramConfig,
    pub config_hash: String,
    pub dsp_decisions: serde_json::Value,
    pub layout: serde_json::Value,
    pub renderer_version: u32,
    pub provider: String,
    pub model: String,
    pub prompt_template_version: String,
    pub shots: usize,
    pub sampling: SamplingParams,
    pub seeds: Seeds,
    pub accounting: Accounting,
    pub folds: Vec<FoldRun>,
}

impl RunManifest {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dataset: DatasetDescriptor,
        config: &SpectrogramConfig,
        provider: &str,
        model: &str,
        shots: usize,
        sampling: SamplingParams,
        seeds: Seeds,
        accounting: Accounting,
        folds: Vec<FoldRun>,
    ) -> Result<Self> {
        let mut m = RunManifest {
            run_id: String::new(),
            tool_version: crate::TOOL_VERSION.to_string(),
            dataset,
            config: config.clone(),
            config_hash: config_hash(config),
            dsp_decisions: serde_json::to_value(DSP_DECISIONS)?,
            layout: serde_json::to_value(Layout::STANDARD)?,
            renderer_version: RENDERER_VERSION,
            provider: provider.to_string(),
            model: model.to_string(),
            prompt_template_version: PROMPT_TEMPLATE_VERSION.to_string(),
            shots,
            sampling,
            seeds,
            accounting,
            folds,
        };
        m.run_id = short_hash(&m);
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::eval::report_io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditFinding {
    pub run_id: String,
    pub test_fold: u8,
    pub message: String,
}

/// Checks that no exemplar shares a fold or a file with its test items.
pub fn audit_manifest(m: &RunManifest) -> Vec<AuditFinding> {
    let mut findings = Vec::new();
    for run in &m.folds {
        let mut flag = |message: String| {
            findings.push(AuditFinding { run_id: m.run_id.clone(), test_fold: run.test_fold, message })
        };
        let test_names: HashSet<&str> = run.test_items.iter().map(|c| c.filename.as_str()).collect();
        for item in &run.test_items {
            if item.fold != run.test_fold {
                flag(format!("test item {} is from fold {}", item.filename, item.fold));
            }
        }
        let Some(set) = &run.exemplars else { continue };
        if set.excluded_fold != run.test_fold {
            flag(format!("exemplar set excludes fold {} instead of {}", set.excluded_fold, run.test_fold));
        }
        for (_, clip) in set.ordered() {
            if clip.fold == run.test_fold {
                flag(format!("exemplar {} is from the test fold", clip.filename));
            }
            if test_names.contains(clip.filename.as_str()) {
                flag(format!("exemplar {} is also a test item", clip.filename));
            }
        }
    }
    findings
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub manifests: Vec<PathBuf>,
    pub fold_runs: usize,
    pub exemplars_checked: usize,
    pub findings: Vec<AuditFinding>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Audits every run manifest found under `root`.
pub fn audit_dir(root: &Path) -> Result<AuditReport> {
    let mut report = AuditReport { manifests: Vec::new(), fold_runs: 0, exemplars_checked: 0, findings: Vec::new() };
    let mut paths: Vec<PathBuf> = WalkDir::new(root)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file() && e.file_name() == RUN_MANIFEST_FILE)
        .map(|e| e.into_path())
        .collect();
    paths.sort();
    for path in paths {
        let m = RunManifest::load(&path)?;
        report.fold_runs += m.folds.len();
        report.exemplars_checked += m.folds.iter().filter_map(|f| f.exemplars.as_ref()).map(ExemplarSet::len).sum::<usize>();
        report.findings.extend(audit_manifest(&m));
        report.manifests.push(path);
    }
    Ok(report)
}
