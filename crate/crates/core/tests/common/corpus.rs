//! Fixture replay, the offline end-to-end run and the partition audit.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use vsc_core::dataset::{class_list, esc10_view, load_manifest, ClipMeta};
use vsc_core::dsp::{FreqAxis, SpectrogramConfig, Unit};
use vsc_core::eval::{cross_validate, evaluate, Accounting, CrossValidation, PredictionRecord};
use vsc_core::exemplars::Feature;
use vsc_core::manifest::{audit_dir, AuditReport, DatasetDescriptor, FoldRun, RunManifest, SamplingParams, Seeds};
use vsc_core::pipeline::{describe_dataset, execute, EvalOptions, FeatureStore, RunOutcome, RunRequest, Selection, Task};
use vsc_core::render::render;
use vsc_core::synth::{synth_manifest, write_corpus, SynthOptions};
use vsc_core::vlm::{
    build_zero_shot_prompt, query, ImageDetail, MockProvider, ParseOptions, Prompt, ProviderClient, ProviderError,
    QueryContext, ResponseCache, RetryPolicy,
};
use vsc_core::{Exec, SpectrogramMatrix};

use super::{fixtures, timed, Check};

/// Provider used for cache replay; any network call is a test failure.
pub struct ReplayOnly(pub String);

impl ProviderClient for ReplayOnly {
    fn provider(&self) -> &str {
        "fixture"
    }
    fn model(&self) -> &str {
        &self.0
    }
    fn complete(&self, _: &Prompt) -> Result<String, ProviderError> {
        Err(ProviderError::Fatal("replay fixture must not reach a provider".into()))
    }
}

pub fn fixture_view() -> Vec<ClipMeta> {
    esc10_view(&synth_manifest())
}

/// Small integer-valued image per item; linear axis keeps it free of
/// transcendental functions so request hashes are portable.
pub fn fixture_prompt(item: &ClipMeta, index: usize, classes: &[String]) -> Prompt {
    let cfg = SpectrogramConfig {
        show_labels: false,
        freq_axis: FreqAxis::Linear,
        image_width_px: 160,
        image_height_px: 120,
        ..Default::default()
    };
    let (bins, frames) = (12, 16);
    // the first cells spell out the item index in binary so every item gets a distinct image
    let values = (0..bins * frames)
        .map(|i| {
            let bit = if i < 12 { (index >> i) & 1 } else { 0 };
            ((i * 7 + item.target as usize * 3) % 53) as f64 + 60.0 * bit as f64
        })
        .collect();
    let m = SpectrogramMatrix::new(
        values,
        bins,
        frames,
        (0..bins).map(|b| b as f64 * 100.0).collect(),
        (0..frames).map(|t| t as f64 * 0.25).collect(),
        Unit::Db,
    )
    .expect("fixture matrix");
    build_zero_shot_prompt(&render(&m, &cfg).expect("fixture render"), classes, ImageDetail::Auto).expect("prompt")
}

pub fn replay(cache_file: &Path, model: &str, folds: &[u8]) -> vsc_core::Result<CrossValidation> {
    let view = fixture_view();
    let classes = class_list(&view);
    let cache = ResponseCache::open_file(cache_file)?;
    let provider = ReplayOnly(model.to_string());
    let ctx = QueryContext { cache: Some(&cache), offline: true, ..Default::default() };
    cross_validate(
        |fold| {
            Ok(view
                .iter()
                .enumerate()
                .filter(|(_, m)| m.fold == fold)
                .map(|(i, m)| {
                    let r = query(&provider, &fixture_prompt(m, i, &classes), &ctx);
                    PredictionRecord::new(m.clone(), r.parsed_label, r.status, model)
                })
                .collect())
        },
        folds,
        &classes,
    )
}

pub const FOLD1_MODEL: &str = "fold1-54of80";
pub const CV_MODEL: &str = "cv-236of400";

pub fn replay_cache_path(model: &str) -> PathBuf {
    fixtures().join("replay").join("fixture").join(format!("{model}.jsonl"))
}

pub fn fixture_replay_check() -> Check {
    let fold1 = replay(&replay_cache_path(FOLD1_MODEL), FOLD1_MODEL, &[1]);
    let cv = replay(&replay_cache_path(CV_MODEL), CV_MODEL, &[1, 2, 3, 4, 5]);
    match (fold1, cv) {
        (Ok(a), Ok(b)) => {
            let a = &a.pooled;
            let b = &b.pooled;
            let (pa, pb) = (format!("{:.2}", a.accuracy_all * 100.0), format!("{:.2}", b.accuracy_all * 100.0));
            Check {
                name: "Fixture replay",
                pass: a.n_correct == 54 && a.n_items == 80 && pa == "67.50" && b.n_correct == 236 && b.n_items == 400 && pb == "59.00",
                detail: format!(
                    "fold 1 {}/{} = {pa}% (67.50), cross-validation {}/{} = {pb}% (59.00), offline cache only",
                    a.n_correct, a.n_items, b.n_correct, b.n_items
                ),
            }
        }
        (a, b) => Check {
            name: "Fixture replay",
            pass: false,
            detail: format!("replay failed: {:?} / {:?}", a.err().map(|e| e.to_string()), b.err().map(|e| e.to_string())),
        },
    }
}

pub struct SynthCorpus {
    pub root: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: Vec<ClipMeta>,
}

impl SynthCorpus {
    pub fn task(&self) -> Task {
        let view = esc10_view(&self.manifest);
        Task { classes: class_list(&view), view, test_subset: None, dataset_root: self.root.join("audio") }
    }
}

/// The synthetic ESC-10 corpus (44.1 kHz, so loading resamples), written
/// once per target directory and reused.
pub fn synth_corpus() -> &'static SynthCorpus {
    static CORPUS: OnceLock<SynthCorpus> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("synth-esc-v1");
        let manifest_path = root.join("meta").join("esc50.csv");
        if !manifest_path.is_file() {
            let staging = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(format!("synth-staging-{}", std::process::id()));
            let _ = std::fs::remove_dir_all(&staging);
            write_corpus(&staging, &SynthOptions { rate_hz: 44_100, seed: 0, esc10_only: true }, Exec::Parallel)
                .expect("synthesize corpus");
            if std::fs::rename(&staging, &root).is_err() {
                // another process won the race
                let _ = std::fs::remove_dir_all(&staging);
            }
        }
        let manifest = load_manifest(&manifest_path).expect("synthetic manifest");
        SynthCorpus { root, manifest_path, manifest }
    })
}

pub struct ProtocolRuns {
    pub _work: tempfile::TempDir,
    pub e2e: RunOutcome,
    pub e2e_seconds: f64,
    pub results_root: PathBuf,
    pub audit: AuditReport,
    pub protocols: Vec<String>,
}

pub fn options(work: &Path, shots: usize, selection: Selection) -> EvalOptions {
    EvalOptions {
        config: SpectrogramConfig::default(),
        shots,
        selection,
        seed: 42,
        detail: ImageDetail::Auto,
        concurrency: 8,
        exec: Exec::Parallel,
        image_root: work.join("images"),
    }
}

fn run(
    corpus: &SynthCorpus,
    task: &Task,
    opts: &EvalOptions,
    folds: Vec<u8>,
    results_root: &Path,
    cache: &ResponseCache,
    features: &mut FeatureStore,
) -> RunOutcome {
    let provider = MockProvider::default();
    let qctx = QueryContext { cache: Some(cache), ..Default::default() };
    let req = RunRequest {
        task,
        folds,
        opts,
        dataset: describe_dataset("esc10", &corpus.manifest_path, task.view.len(), None).unwrap(),
        seeds: Seeds { selection: opts.seed, subset: 7, tie_break: 0 },
        accounting: Accounting::All,
        sampling: SamplingParams::new(RetryPolicy::default(), &ParseOptions::default()),
        results_root: results_root.to_path_buf(),
    };
    execute(&req, &provider, &qctx, features).expect("protocol run")
}

pub fn handpicked_listing(task: &Task, test_fold: u8) -> Vec<(String, Vec<String>)> {
    task.classes
        .iter()
        .map(|c| {
            let pick = task.pool(test_fold).into_iter().filter(|m| &m.category == c).min_by(|a, b| a.filename.cmp(&b.filename));
            (c.clone(), vec![pick.expect("pool clip").filename])
        })
        .collect()
}

/// Runs the end-to-end protocol plus the other table protocols once per
/// process, then audits every manifest written.
pub fn protocol_runs() -> &'static ProtocolRuns {
    static RUNS: OnceLock<ProtocolRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let corpus = synth_corpus();
        let work = tempfile::tempdir().expect("work dir");
        let task = corpus.task();
        let results_root = work.path().join("results");
        let cache = ResponseCache::open(&work.path().join("cache"), "mock", "nearest-exemplar").unwrap();
        let mut features = FeatureStore::default();
        let kmeans_mel = Selection::Kmeans { feature: Feature::Mel, k: 3 };

        let (e2e, e2e_seconds) = timed(|| {
            let opts = options(work.path(), 10, kmeans_mel.clone());
            run(corpus, &task, &opts, vec![1], &results_root, &cache, &mut features)
        });
        let mut protocols = vec!["10-shot k-means mel k=3 fold 1".to_string()];
        let extra: Vec<(&str, usize, Selection, Vec<u8>)> = vec![
            ("zero-shot fold 1", 0, Selection::Random, vec![1]),
            ("10-shot random fold 1", 10, Selection::Random, vec![1]),
            ("10-shot hand-picked fold 1", 10, Selection::Handpicked { listing: handpicked_listing(&task, 1) }, vec![1]),
            ("20-shot k-means mel k=3 fold 1", 20, kmeans_mel.clone(), vec![1]),
            ("10-shot k-means mel k=3 cross-validation", 10, kmeans_mel.clone(), vec![1, 2, 3, 4, 5]),
        ];
        for (label, shots, selection, folds) in extra {
            let opts = options(work.path(), shots, selection);
            run(corpus, &task, &opts, folds, &results_root, &cache, &mut features);
            protocols.push(label.to_string());
        }
        let audit = audit_dir(&results_root).expect("audit");
        ProtocolRuns { _work: work, e2e, e2e_seconds, results_root, audit, protocols }
    })
}

pub fn expected_e2e_path() -> PathBuf {
    fixtures().join("e2e_expected.json")
}

pub fn offline_e2e_check() -> Check {
    let runs = protocol_runs();
    let r = runs.e2e.headline();
    let committed: Option<usize> = std::fs::read(expected_e2e_path())
        .ok()
        .and_then(|b| serde_json::from_slice::<serde_json::Value>(&b).ok())
        .and_then(|v| v["n_correct"].as_u64())
        .map(|n| n as usize);
    let matches = committed == Some(r.n_correct);
    Check {
        name: "Offline end-to-end",
        pass: r.accuracy_all > 0.30 && r.n_items == 80 && matches && runs.e2e_seconds < 600.0,
        detail: format!(
            "mock nearest-exemplar, 10-shot k-means mel, fold 1: {}/{} = {:.2}% (>30%), committed {:?}, {:.1}s incl. rendering (<600s)",
            r.n_correct,
            r.n_items,
            r.accuracy_all * 100.0,
            committed,
            runs.e2e_seconds
        ),
    }
}

/// A manifest with a deliberate leak, to show the audit is not vacuous.
pub fn leaky_manifest_caught() -> bool {
    let task = synth_corpus().task();
    let dir = tempfile::tempdir().unwrap();
    let test = task.test_items(1);
    let mut set = vsc_core::exemplars::select_random(&task.pool(1), &task.classes, 1, 1, 3).unwrap();
    set.per_class[0].clips[0] = test[0].clone();
    let m = RunManifest::new(
        DatasetDescriptor { view: "esc10".into(), manifest_path: "x".into(), manifest_sha256: "x".into(), n_rows: 400, subset_seed: None },
        &SpectrogramConfig::default(),
        "mock",
        "m",
        10,
        SamplingParams::new(RetryPolicy::default(), &ParseOptions::default()),
        Seeds { selection: 3, subset: 7, tie_break: 0 },
        Accounting::All,
        vec![FoldRun { test_fold: 1, test_items: test, exemplars: Some(set) }],
    )
    .unwrap();
    m.write(&dir.path().join("leak").join(vsc_core::manifest::RUN_MANIFEST_FILE)).unwrap();
    !audit_dir(dir.path()).unwrap().is_clean()
}

pub fn partition_audit_check() -> Check {
    let runs = protocol_runs();
    let a = &runs.audit;
    let caught = leaky_manifest_caught();
    Check {
        name: "Partition audit",
        pass: a.is_clean() && a.manifests.len() == runs.protocols.len() && a.exemplars_checked > 0 && caught,
        detail: format!(
            "{} manifests, {} fold runs, {} exemplars checked, {} overlaps; planted leak detected: {caught}",
            a.manifests.len(),
            a.fold_runs,
            a.exemplars_checked,
            a.findings.len()
        ),
    }
}

/// Evaluates stored records directly, for parity checks.
pub fn evaluate_records(records: &[PredictionRecord], classes: &[String]) -> vsc_core::eval::EvalResult {
    evaluate(records, classes).unwrap()
}
