//! End-to-end orchestration: corpus rendering, per-fold exemplar selection,
//! prompt construction, cached querying and run manifests.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{load_all, load_audio, ClipMeta, TARGET_RATE_HZ};
use crate::dsp::{SpectrogramConfig, DSP_DECISIONS};
use crate::error::{Error, Result};
use crate::eval::report_io::{write_file, write_json};
use crate::eval::{
    evaluate, render_cv_report, render_report, Accounting, CrossValidation, EvalResult, FoldResult, PredictionRecord,
};
use crate::exemplars::{featurize, select_handpicked, select_kmeans, select_random, ExemplarSet, Feature, FeatureVector};
use crate::hash::sha256_hex;
use crate::manifest::{DatasetDescriptor, FoldRun, RunManifest, SamplingParams, Seeds, RUN_MANIFEST_FILE};
use crate::par::Exec;
use crate::render::{clip_hash, config_hash, render_clip, RenderSidecar, RenderedSpectrogram};
use crate::vlm::{
    build_few_shot_prompt, build_zero_shot_prompt, query, request_hash, ImageDetail, ModelResponse, Prompt,
    ProviderClient, QueryContext, ResponseStatus,
};

/// The clips a protocol draws from.
#[derive(Debug, Clone)]
pub struct Task {
    /// Every clip exemplars may come from (the ESC-10 view, or full ESC-50).
    pub view: Vec<ClipMeta>,
    pub classes: Vec<String>,
    /// Restricts test items (the ESC-50 subset); `None` tests whole folds.
    pub test_subset: Option<Vec<ClipMeta>>,
    pub dataset_root: PathBuf,
}

impl Task {
    pub fn test_items(&self, fold: u8) -> Vec<ClipMeta> {
        let source = self.test_subset.as_ref().unwrap_or(&self.view);
        source.iter().filter(|m| m.fold == fold).cloned().collect()
    }

    pub fn pool(&self, fold: u8) -> Vec<ClipMeta> {
        self.view.iter().filter(|m| m.fold != fold).cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "method")]
pub enum Selection {
    Random,
    Kmeans { feature: Feature, k: usize },
    Handpicked { listing: Vec<(String, Vec<String>)> },
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub config: SpectrogramConfig,
    /// Total exemplar count; a multiple of the class count. Zero means zero-shot.
    pub shots: usize,
    pub selection: Selection,
    pub seed: u64,
    pub detail: ImageDetail,
    /// In-flight request limit.
    pub concurrency: usize,
    pub exec: Exec,
    /// Root under which `<config_hash>/` corpora live.
    pub image_root: PathBuf,
}

impl EvalOptions {
    pub fn per_class(&self, n_classes: usize) -> Result<usize> {
        if n_classes == 0 || !self.shots.is_multiple_of(n_classes) {
            return Err(Error::Config(format!(
                "--shots {} must be a multiple of the class count {n_classes}",
                self.shots
            )));
        }
        Ok(self.shots / n_classes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderOutcome {
    pub dir: PathBuf,
    pub rendered: usize,
    pub skipped: usize,
    pub images: BTreeMap<String, RenderedSpectrogram>,
}

pub fn corpus_dir(image_root: &Path, cfg: &SpectrogramConfig) -> PathBuf {
    image_root.join(config_hash(cfg))
}

fn read_rendered(dir: &Path, meta: &ClipMeta, hash: &str) -> Result<Option<RenderedSpectrogram>> {
    let png = dir.join(format!("{}.png", meta.stem()));
    let side = dir.join(format!("{}.json", meta.stem()));
    if !png.is_file() || !side.is_file() {
        return Ok(None);
    }
    let bytes = std::fs::read(&png).map_err(|e| Error::io(&png, e))?;
    let doc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&side).map_err(|e| Error::io(&side, e))?)?;
    if doc["image_sha256"].as_str() != Some(sha256_hex(&bytes).as_str()) {
        return Ok(None);
    }
    let dim = |k: &str| doc[k].as_u64().unwrap_or(0) as u32;
    Ok(Some(RenderedSpectrogram {
        config_hash: hash.to_string(),
        clip_hash: Some(clip_hash(hash, &meta.filename)),
        width_px: dim("width_px"),
        height_px: dim("height_px"),
        image_bytes: bytes,
    }))
}

/// Renders every clip in `metas` to `<image_root>/<config_hash>/<stem>.png`
/// plus a JSON sidecar. Images whose sidecar hash matches are reused.
pub fn render_corpus(
    metas: &[ClipMeta],
    dataset_root: &Path,
    cfg: &SpectrogramConfig,
    image_root: &Path,
    exec: Exec,
) -> Result<RenderOutcome> {
    cfg.validate()?;
    let hash = config_hash(cfg);
    let dir = image_root.join(&hash);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let existing = metas.iter().map(|m| read_rendered(&dir, m, &hash)).collect::<Result<Vec<_>>>()?;
    let todo: Vec<&ClipMeta> = metas.iter().zip(&existing).filter(|(_, e)| e.is_none()).map(|(m, _)| m).collect();
    let fresh = exec.try_map(&todo, |meta| {
        let clip = load_audio(meta, dataset_root, TARGET_RATE_HZ)?;
        let r = render_clip(&clip, cfg)?;
        let sidecar = RenderSidecar {
            config: cfg,
            config_hash: &r.config_hash,
            clip_hash: r.clip_hash.as_deref(),
            filename: Some(&meta.filename),
            decisions: &DSP_DECISIONS,
            width_px: r.width_px,
            height_px: r.height_px,
            image_sha256: r.image_sha256(),
        };
        write_file(&dir.join(format!("{}.png", meta.stem())), &r.image_bytes)?;
        write_json(&dir.join(format!("{}.json", meta.stem())), &sidecar)?;
        Ok::<_, Error>(((*meta).clone(), r))
    })?;
    let rendered = fresh.len();
    let mut images = BTreeMap::new();
    for (m, e) in metas.iter().zip(existing) {
        if let Some(r) = e {
            images.insert(m.filename.clone(), r);
        }
    }
    let skipped = images.len();
    for (m, r) in fresh {
        images.insert(m.filename, r);
    }
    tracing::info!(dir = %dir.display(), rendered, skipped, "render corpus");
    Ok(RenderOutcome { dir, rendered, skipped, images })
}

/// Clustering features keyed by file name, computed once per feature kind.
#[derive(Debug, Default)]
pub struct FeatureStore {
    store: HashMap<(Feature, String), Vec<f64>>,
}

impl FeatureStore {
    fn ensure(&mut self, metas: &[ClipMeta], root: &Path, feature: Feature, exec: Exec) -> Result<Vec<FeatureVector>> {
        let missing: Vec<ClipMeta> =
            metas.iter().filter(|m| !self.store.contains_key(&(feature, m.filename.clone()))).cloned().collect();
        if !missing.is_empty() {
            let clips = load_all(&missing, root, TARGET_RATE_HZ, exec)?;
            let feats = exec.try_map(&clips, |c| featurize(c, feature))?;
            for f in feats {
                self.store.insert((feature, f.clip.filename.clone()), f.values);
            }
        }
        Ok(metas
            .iter()
            .map(|m| FeatureVector { clip: m.clone(), values: self.store[&(feature, m.filename.clone())].clone() })
            .collect())
    }
}

pub fn select_for_fold(
    task: &Task,
    fold: u8,
    opts: &EvalOptions,
    features: &mut FeatureStore,
) -> Result<Option<ExemplarSet>> {
    if opts.shots == 0 {
        return Ok(None);
    }
    let per_class = opts.per_class(task.classes.len())?;
    let pool = task.pool(fold);
    let set = match &opts.selection {
        Selection::Random => select_random(&pool, &task.classes, per_class, fold, opts.seed)?,
        Selection::Kmeans { feature, k } => {
            let relevant: Vec<ClipMeta> = pool.into_iter().filter(|m| task.classes.contains(&m.category)).collect();
            let fv = features.ensure(&relevant, &task.dataset_root, *feature, opts.exec)?;
            select_kmeans(&fv, &task.classes, per_class, *k, *feature, fold, opts.seed, opts.exec)?
        }
        Selection::Handpicked { listing } => {
            let set = select_handpicked(listing, &task.view, &task.classes, fold)?;
            if set.per_class_count != per_class {
                return Err(Error::Config(format!(
                    "hand-picked listing has {} per class but --shots asks for {per_class}",
                    set.per_class_count
                )));
            }
            set
        }
    };
    set.validate(&task.classes)?;
    Ok(Some(set))
}

#[derive(Debug, Clone)]
pub struct FoldPrompts {
    pub fold: u8,
    pub exemplars: Option<ExemplarSet>,
    pub items: Vec<(ClipMeta, Prompt)>,
    pub rendered: usize,
}

pub fn build_fold_prompts(
    task: &Task,
    fold: u8,
    opts: &EvalOptions,
    features: &mut FeatureStore,
) -> Result<FoldPrompts> {
    let tests = task.test_items(fold);
    if tests.is_empty() {
        return Err(Error::InsufficientData(format!("fold {fold} has no test items")));
    }
    let exemplars = select_for_fold(task, fold, opts, features)?;
    let mut needed = tests.clone();
    if let Some(set) = &exemplars {
        needed.extend(set.ordered().into_iter().map(|(_, m)| m.clone()));
    }
    let corpus = render_corpus(&needed, &task.dataset_root, &opts.config, &opts.image_root, opts.exec)?;
    let shots: Vec<(String, RenderedSpectrogram)> = exemplars
        .as_ref()
        .map(|s| s.ordered().into_iter().map(|(c, m)| (c.to_string(), corpus.images[&m.filename].clone())).collect())
        .unwrap_or_default();
    let items = tests
        .into_iter()
        .map(|m| {
            let img = &corpus.images[&m.filename];
            let p = if shots.is_empty() {
                build_zero_shot_prompt(img, &task.classes, opts.detail)?
            } else {
                build_few_shot_prompt(&shots, img, &task.classes, opts.detail)?
            };
            Ok((m, p))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FoldPrompts { fold, exemplars, items, rendered: corpus.rendered })
}

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: u8,
    pub exemplars: Option<ExemplarSet>,
    pub records: Vec<PredictionRecord>,
    pub responses: Vec<ModelResponse>,
}

pub fn run_fold(
    task: &Task,
    fold: u8,
    opts: &EvalOptions,
    provider: &dyn ProviderClient,
    qctx: &QueryContext<'_>,
    features: &mut FeatureStore,
) -> Result<FoldOutcome> {
    let prepared = build_fold_prompts(task, fold, opts, features)?;
    // results stay in item order whatever order requests complete in
    let responses = opts.exec.map_bounded(&prepared.items, opts.concurrency.max(1), |(_, p)| query(provider, p, qctx));
    let records = prepared
        .items
        .iter()
        .zip(&responses)
        .map(|((m, _), r)| PredictionRecord::new(m.clone(), r.parsed_label.clone(), r.status, provider.model()))
        .collect();
    Ok(FoldOutcome { fold, exemplars: prepared.exemplars, records, responses })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DryRunReport {
    pub requests: usize,
    pub cached: usize,
    pub network_requests: usize,
    pub images_per_request: usize,
    pub payload_bytes: u64,
}

/// Counts requests and serialized prompt bytes without contacting a provider.
pub fn dry_run(
    task: &Task,
    folds: &[u8],
    opts: &EvalOptions,
    provider: &str,
    model: &str,
    cache: Option<&crate::vlm::ResponseCache>,
    features: &mut FeatureStore,
) -> Result<DryRunReport> {
    let mut report = DryRunReport { requests: 0, cached: 0, network_requests: 0, images_per_request: 0, payload_bytes: 0 };
    for &fold in folds {
        let prepared = build_fold_prompts(task, fold, opts, features)?;
        for (_, p) in &prepared.items {
            report.requests += 1;
            report.images_per_request = p.image_count();
            report.payload_bytes += p.to_json().len() as u64;
            let hit = cache.is_some_and(|c| c.get(&request_hash(provider, model, p)).is_some());
            report.cached += hit as usize;
        }
    }
    report.network_requests = report.requests - report.cached;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct RunRequest<'a> {
    pub task: &'a Task,
    pub folds: Vec<u8>,
    pub opts: &'a EvalOptions,
    pub dataset: DatasetDescriptor,
    pub seeds: Seeds,
    pub accounting: Accounting,
    pub sampling: SamplingParams,
    /// Reports land in `<results_root>/<run_id>/`.
    pub results_root: PathBuf,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub results_dir: PathBuf,
    pub folds: Vec<FoldOutcome>,
    pub cross_validation: CrossValidation,
    pub transport_errors: usize,
}

impl RunOutcome {
    pub fn headline(&self) -> &EvalResult {
        &self.cross_validation.pooled
    }
}

/// Runs every requested fold, then writes the run manifest, predictions and
/// reports. One fold is reported directly; several are reported as a
/// cross-validation with a pooled score.
pub fn execute(
    req: &RunRequest<'_>,
    provider: &dyn ProviderClient,
    qctx: &QueryContext<'_>,
    features: &mut FeatureStore,
) -> Result<RunOutcome> {
    if req.folds.is_empty() {
        return Err(Error::Config("no folds requested".into()));
    }
    let mut outcomes = Vec::with_capacity(req.folds.len());
    for &fold in &req.folds {
        let o = run_fold(req.task, fold, req.opts, provider, qctx, features)?;
        tracing::info!(fold, items = o.records.len(), "fold complete");
        outcomes.push(o);
    }
    let mut per_fold = Vec::new();
    let mut all = Vec::new();
    for o in &outcomes {
        per_fold.push(FoldResult { fold: o.fold, result: evaluate(&o.records, &req.task.classes)? });
        all.extend(o.records.iter().cloned());
    }
    let cv = CrossValidation { folds: per_fold, pooled: evaluate(&all, &req.task.classes)? };
    let transport_errors = all.iter().filter(|r| r.status == ResponseStatus::TransportError).count();
    let manifest = RunManifest::new(
        req.dataset.clone(),
        &req.opts.config,
        provider.provider(),
        provider.model(),
        req.opts.shots,
        req.sampling.clone(),
        req.seeds.clone(),
        req.accounting,
        outcomes
            .iter()
            .map(|o| FoldRun { test_fold: o.fold, test_items: o.records.iter().map(|r| r.item.clone()).collect(), exemplars: o.exemplars.clone() })
            .collect(),
    )?;
    let dir = req.results_root.join(&manifest.run_id);
    manifest.write(&dir.join(RUN_MANIFEST_FILE))?;
    let mut lines = String::new();
    for o in &outcomes {
        for (record, response) in o.records.iter().zip(&o.responses) {
            lines.push_str(&serde_json::to_string(&serde_json::json!({"record": record, "response": response}))?);
            lines.push('\n');
        }
    }
    write_file(&dir.join("predictions.jsonl"), lines.as_bytes())?;
    if cv.folds.len() == 1 {
        render_report(&cv.folds[0].result, req.accounting, &dir)?;
    } else {
        render_cv_report(&cv, req.accounting, &dir)?;
    }
    Ok(RunOutcome { manifest, results_dir: dir, folds: outcomes, cross_validation: cv, transport_errors })
}

/// Hash of the manifest file bytes for dataset descriptors.
pub fn describe_dataset(view: &str, manifest_path: &Path, n_rows: usize, subset_seed: Option<u64>) -> Result<DatasetDescriptor> {
    let bytes = std::fs::read(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    Ok(DatasetDescriptor {
        view: view.to_string(),
        manifest_path: manifest_path.display().to_string(),
        manifest_sha256: sha256_hex(&bytes),
        n_rows,
        subset_seed,
    })
}

/// Distinct test-fold set check used by callers before a sweep.
pub fn unique_folds(folds: &[u8]) -> Result<Vec<u8>> {
    let mut seen = HashSet::new();
    for &f in folds {
        if !(1..=5).contains(&f) {
            return Err(Error::Config(format!("fold {f} is outside 1..5")));
        }
        if !seen.insert(f) {
            return Err(Error::Config(format!("fold {f} requested twice")));
        }
    }
    Ok(folds.to_vec())
}
