use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde_json::json;
use thiserror::Error;
use vsc_annotate::{load_or_create_salt, load_sessions, study_summary, AnnotateError, Store, Study};
use vsc_core::dataset::{class_list, esc10_view, esc50_subset, load_manifest, FOLDS};
use vsc_core::dsp::Detail;
use vsc_core::eval::report_io::write_json;
use vsc_core::exemplars::parse_handpicked;
use vsc_core::manifest::{audit_dir, SamplingParams, Seeds};
use vsc_core::pipeline::{
    corpus_dir, describe_dataset, dry_run, execute, render_corpus, select_for_fold, unique_folds, EvalOptions,
    FeatureStore, RunRequest, Selection, Task,
};
use vsc_core::render::{ablation_grid, config_hash};
use vsc_core::synth::{write_corpus, SynthOptions};
use vsc_core::vlm::{
    build_provider, ImageDetail, ParseOptions, Prompt, ProviderClient, ProviderError, ProviderKind, QueryContext,
    ReqwestTransport, ResponseCache, RetryPolicy,
};
use vsc_core::{Exec, SpectrogramConfig};

use crate::args::{
    AuditArgs, ConfigArgs, DatasetArgs, EvalArgs, ExemplarArgs, QueryArgs, RenderArgs, SelectArg, ServeArgs, ShotArgs,
    StudyReportArgs, SweepArgs, SynthArgs, View,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] vsc_core::Error),
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Core(e) if e.is_config() => 1,
            CliError::Annotate(AnnotateError::Validation(_)) => 1,
            CliError::Annotate(AnnotateError::Core(e)) if e.is_config() => 1,
            _ => 2,
        }
    }
}

pub enum Outcome {
    Success,
    /// Completed, but this many items ended in transport errors.
    Partial(usize),
}

type CliResult = Result<Outcome, CliError>;

fn exec(sequential: bool) -> Exec {
    if sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

fn print_json(v: &serde_json::Value) {
    use std::io::Write;
    // a closed pipe (`| head`) is not an error worth a panic
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(v).expect("json values serialize"));
}

struct Loaded {
    task: Task,
    manifest_path: PathBuf,
    view_name: &'static str,
    subset_seed: Option<u64>,
}

fn load_task(d: &DatasetArgs) -> Result<Loaded, CliError> {
    let manifest_path = d.manifest.clone().unwrap_or_else(|| d.dataset_root.join("meta").join("esc50.csv"));
    let manifest = load_manifest(&manifest_path)?;
    let dataset_root = d.dataset_root.join("audio");
    let loaded = match d.view {
        View::Esc10 => {
            let view = esc10_view(&manifest);
            if view.is_empty() {
                return Err(CliError::Data(format!("{} has no ESC-10 rows", manifest_path.display())));
            }
            Loaded {
                task: Task { classes: class_list(&view), view, test_subset: None, dataset_root },
                manifest_path,
                view_name: "esc10",
                subset_seed: None,
            }
        }
        View::Esc50Subset => {
            let subset = esc50_subset(&manifest, d.subset_seed)?;
            Loaded {
                task: Task { classes: class_list(&manifest), view: manifest, test_subset: Some(subset), dataset_root },
                manifest_path,
                view_name: "esc50-subset",
                subset_seed: Some(d.subset_seed),
            }
        }
    };
    Ok(loaded)
}

fn selection(s: &ShotArgs) -> Result<Selection, CliError> {
    Ok(match s.select {
        SelectArg::Random => Selection::Random,
        SelectArg::Kmeans => Selection::Kmeans { feature: s.feature, k: s.k },
        SelectArg::Handpicked => {
            let path = s.handpicked.as_ref().ok_or_else(|| CliError::Config("--select handpicked needs --handpicked <file>".into()))?;
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            Selection::Handpicked { listing: parse_handpicked(&text)? }
        }
    })
}

fn image_detail(cfg: &SpectrogramConfig) -> ImageDetail {
    match cfg.detail {
        Detail::Low => ImageDetail::Low,
        Detail::Standard => ImageDetail::Auto,
    }
}

fn options(config: SpectrogramConfig, c: &ConfigArgs, shots: Option<&ShotArgs>, concurrency: usize) -> Result<EvalOptions, CliError> {
    config.validate()?;
    let (n, sel, seed) = match shots {
        Some(s) => (s.shots, selection(s)?, s.seed),
        None => (0, Selection::Random, 42),
    };
    Ok(EvalOptions {
        detail: image_detail(&config),
        config,
        shots: n,
        selection: sel,
        seed,
        concurrency,
        exec: exec(c.sequential),
        image_root: c.image_root.clone(),
    })
}

pub fn synth(a: SynthArgs) -> CliResult {
    let opts = SynthOptions { rate_hz: a.rate, seed: a.seed, esc10_only: !a.all_classes };
    let manifest = write_corpus(&a.out, &opts, Exec::default())?;
    print_json(&json!({ "dataset_root": a.out, "manifest": manifest }));
    Ok(Outcome::Success)
}

pub fn render(a: RenderArgs) -> CliResult {
    let loaded = load_task(&a.dataset)?;
    let folds = if a.fold.is_empty() { FOLDS.to_vec() } else { unique_folds(&a.fold)? };
    let source = loaded.task.test_subset.as_ref().unwrap_or(&loaded.task.view);
    let clips: Vec<_> = source.iter().filter(|m| folds.contains(&m.fold)).cloned().collect();
    let base = a.config.config();
    let configs: Vec<(String, SpectrogramConfig)> = if a.ablation_grid {
        ablation_grid(&base).into_iter().map(|v| (v.slug, v.config)).collect()
    } else {
        vec![("config".to_string(), base)]
    };
    let mut rows = Vec::new();
    for (name, cfg) in configs {
        let out = render_corpus(&clips, &loaded.task.dataset_root, &cfg, &a.config.image_root, exec(a.config.sequential))?;
        rows.push(json!({ "variant": name, "config_hash": config_hash(&cfg), "dir": out.dir, "rendered": out.rendered, "skipped": out.skipped }));
    }
    print_json(&json!({ "clips": clips.len(), "corpora": rows }));
    Ok(Outcome::Success)
}

pub fn exemplars(a: ExemplarArgs) -> CliResult {
    let loaded = load_task(&a.dataset)?;
    unique_folds(&[a.fold])?;
    if a.shots.shots == 0 {
        return Err(CliError::Config("--shots must be positive when selecting exemplars".into()));
    }
    let opts = EvalOptions {
        config: SpectrogramConfig::default(),
        shots: a.shots.shots,
        selection: selection(&a.shots)?,
        seed: a.shots.seed,
        detail: ImageDetail::Auto,
        concurrency: 1,
        exec: exec(a.sequential),
        image_root: PathBuf::new(),
    };
    let set = select_for_fold(&loaded.task, a.fold, &opts, &mut FeatureStore::default())?.expect("positive shots select exemplars");
    match &a.out {
        Some(p) => write_json(p, &set)?,
        None => print_json(&serde_json::to_value(&set).map_err(vsc_core::Error::from)?),
    }
    Ok(Outcome::Success)
}

/// Stand-in for offline replay when no credentials are configured; the
/// query loop never calls it because cache misses short-circuit.
struct CacheOnly {
    provider: String,
    model: String,
}

impl ProviderClient for CacheOnly {
    fn provider(&self) -> &str {
        &self.provider
    }
    fn model(&self) -> &str {
        &self.model
    }
    fn complete(&self, _: &Prompt) -> Result<String, ProviderError> {
        Err(ProviderError::Fatal("offline run reached the provider".into()))
    }
}

fn provider_names(q: &QueryArgs) -> Result<(ProviderKind, String), CliError> {
    let kind: ProviderKind = q.provider.parse()?;
    let model = match (&q.model, kind) {
        (Some(m), _) => m.clone(),
        (None, ProviderKind::Mock) => "nearest-exemplar".to_string(),
        (None, _) => return Err(CliError::Config(format!("--model is required for provider {}", q.provider))),
    };
    Ok((kind, model))
}

fn provider(q: &QueryArgs) -> Result<Box<dyn ProviderClient>, CliError> {
    let (kind, model) = provider_names(q)?;
    let env = |k: &str| std::env::var(k).ok();
    let transport = Arc::new(ReqwestTransport::new(Duration::from_secs(q.timeout_secs))?);
    match build_provider(kind, &model, &env, transport, q.debug_wire) {
        Err(e) if q.offline && e.is_config() => {
            tracing::info!("no credentials; offline run uses the cache alone");
            Ok(Box::new(CacheOnly { provider: q.provider.clone(), model }))
        }
        other => Ok(other?),
    }
}

fn provider_label(kind: ProviderKind, q: &QueryArgs) -> String {
    match kind {
        ProviderKind::Mock => vsc_core::vlm::MockProvider::PROVIDER.to_string(),
        _ => q.provider.clone(),
    }
}

struct EvalRun<'a> {
    loaded: &'a Loaded,
    opts: &'a EvalOptions,
    folds: Vec<u8>,
    query: &'a QueryArgs,
    provider: &'a dyn ProviderClient,
    cache: &'a ResponseCache,
    selection_seed: u64,
    features: &'a mut FeatureStore,
}

fn run_eval(r: EvalRun<'_>) -> Result<vsc_core::pipeline::RunOutcome, CliError> {
    let parse = ParseOptions::default();
    let retry = RetryPolicy::default();
    let qctx = QueryContext { cache: Some(r.cache), retry, parse: parse.clone(), offline: r.query.offline, ..Default::default() };
    let req = RunRequest {
        task: &r.loaded.task,
        folds: r.folds,
        opts: r.opts,
        dataset: describe_dataset(r.loaded.view_name, &r.loaded.manifest_path, r.loaded.task.view.len(), r.loaded.subset_seed)?,
        seeds: Seeds { selection: r.selection_seed, subset: r.loaded.subset_seed.unwrap_or(0), tie_break: r.query.tie_break_seed },
        accounting: r.query.accounting,
        sampling: SamplingParams::new(retry, &parse),
        results_root: r.query.out_dir.clone(),
    };
    Ok(execute(&req, r.provider, &qctx, r.features)?)
}

pub fn eval(a: EvalArgs) -> CliResult {
    let loaded = load_task(&a.dataset)?;
    let folds = if a.cross_validate {
        FOLDS.to_vec()
    } else if a.fold.is_empty() {
        vec![1]
    } else {
        unique_folds(&a.fold)?
    };
    let opts = options(a.config.config(), &a.config, Some(&a.shots), a.query.concurrency)?;
    opts.per_class(loaded.task.classes.len())?;
    let (kind, model) = provider_names(&a.query)?;
    let label = provider_label(kind, &a.query);
    let cache = ResponseCache::open(&a.query.cache_dir, &label, &model)?;
    let mut features = FeatureStore::default();
    if a.query.dry_run {
        let report = dry_run(&loaded.task, &folds, &opts, &label, &model, Some(&cache), &mut features)?;
        print_json(&serde_json::to_value(&report).map_err(vsc_core::Error::from)?);
        return Ok(Outcome::Success);
    }
    let client = provider(&a.query)?;
    let outcome = run_eval(EvalRun {
        loaded: &loaded,
        opts: &opts,
        folds,
        query: &a.query,
        provider: client.as_ref(),
        cache: &cache,
        selection_seed: a.shots.seed,
        features: &mut features,
    })?;
    let h = outcome.headline();
    let per_fold: Vec<_> = outcome
        .cross_validation
        .folds
        .iter()
        .map(|f| json!({ "fold": f.fold, "n_correct": f.result.n_correct, "n_items": f.result.n_items, "accuracy": f.result.accuracy(a.query.accounting) }))
        .collect();
    print_json(&json!({
        "run_id": outcome.manifest.run_id,
        "results_dir": outcome.results_dir,
        "provider": outcome.manifest.provider,
        "model": outcome.manifest.model,
        "shots": opts.shots,
        "accounting": a.query.accounting.to_string(),
        "n_items": h.n_items,
        "n_answered": h.n_answered,
        "n_correct": h.n_correct,
        "accuracy": h.accuracy(a.query.accounting),
        "folds": per_fold,
        "transport_errors": outcome.transport_errors,
    }));
    Ok(if outcome.transport_errors > 0 { Outcome::Partial(outcome.transport_errors) } else { Outcome::Success })
}

pub fn sweep(a: SweepArgs) -> CliResult {
    let loaded = load_task(&a.dataset)?;
    unique_folds(&[a.fold])?;
    let (kind, model) = provider_names(&a.query)?;
    let label = provider_label(kind, &a.query);
    let cache = ResponseCache::open(&a.query.cache_dir, &label, &model)?;
    let client = if a.query.dry_run { None } else { Some(provider(&a.query)?) };
    let mut features = FeatureStore::default();
    let mut rows = Vec::new();
    let mut errors = 0;
    for variant in ablation_grid(&a.config.config()) {
        let opts = options(variant.config.clone(), &a.config, None, a.query.concurrency)?;
        let row = match &client {
            None => {
                let r = dry_run(&loaded.task, &[a.fold], &opts, &label, &model, Some(&cache), &mut features)?;
                json!({ "variant": variant.label, "slug": variant.slug, "dry_run": r })
            }
            Some(client) => {
                let o = run_eval(EvalRun {
                    loaded: &loaded,
                    opts: &opts,
                    folds: vec![a.fold],
                    query: &a.query,
                    provider: client.as_ref(),
                    cache: &cache,
                    selection_seed: opts.seed,
                    features: &mut features,
                })?;
                errors += o.transport_errors;
                let h = o.headline();
                json!({
                    "variant": variant.label,
                    "slug": variant.slug,
                    "run_id": o.manifest.run_id,
                    "n_correct": h.n_correct,
                    "n_items": h.n_items,
                    "accuracy": h.accuracy(a.query.accounting),
                    "transport_errors": o.transport_errors,
                })
            }
        };
        rows.push(row);
    }
    print_json(&json!({ "fold": a.fold, "provider": label, "model": model, "accounting": a.query.accounting.to_string(), "variants": rows }));
    Ok(if errors > 0 { Outcome::Partial(errors) } else { Outcome::Success })
}

fn build_study(a: &ServeArgs) -> Result<Study, CliError> {
    let loaded = load_task(&a.dataset)?;
    unique_folds(&[a.fold])?;
    if a.shots.shots == 0 {
        return Err(CliError::Config("the study needs an exemplar grid: pass --shots > 0".into()));
    }
    let cfg = a.config.config();
    let opts = options(cfg.clone(), &a.config, Some(&a.shots), 1)?;
    let exemplars = select_for_fold(&loaded.task, a.fold, &opts, &mut FeatureStore::default())?.expect("positive shots select exemplars");
    let mut needed = loaded.task.test_items(a.fold);
    needed.extend(exemplars.ordered().into_iter().map(|(_, m)| m.clone()));
    let corpus = render_corpus(&needed, &loaded.task.dataset_root, &cfg, &a.config.image_root, opts.exec)?;
    debug_assert_eq!(corpus.dir, corpus_dir(&a.config.image_root, &cfg));
    let salt = load_or_create_salt(&a.sessions_dir)?;
    let items = loaded.task.test_items(a.fold);
    Ok(Study::new(loaded.task.classes.clone(), items, exemplars, corpus.dir, config_hash(&cfg), &salt)?)
}

pub fn serve(a: ServeArgs) -> CliResult {
    let study = build_study(&a)?;
    let store = Arc::new(Store::open(study, &a.sessions_dir)?);
    let addr = std::net::SocketAddr::new(a.host, a.port);
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Config(format!("cannot start runtime: {e}")))?;
    rt.block_on(async {
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        };
        vsc_annotate::serve(store, addr, shutdown).await
    })
    .map_err(|e| match e {
        AnnotateError::Io { path, source } => CliError::Config(format!("cannot serve on {}: {source}", path.display())),
        other => other.into(),
    })?;
    Ok(Outcome::Success)
}

pub fn study_report(a: StudyReportArgs) -> CliResult {
    let sessions = load_sessions(&a.sessions_dir)?;
    let summary = study_summary(&sessions.into_iter().map(Arc::new).collect::<Vec<_>>(), a.accounting, a.tie_break_seed)?;
    let paths = summary.write(&a.out)?;
    let experts: Vec<_> = summary.experts.iter().map(|(e, r)| json!({ "expert": e, "accuracy": r.accuracy(a.accounting) })).collect();
    print_json(&json!({
        "experts": experts,
        "mean_kappa": summary.kappa.mean,
        "kappa": summary.kappa.matrix,
        "ensemble_accuracy": summary.ensemble.accuracy(a.accounting),
        "summary": paths.summary,
    }));
    Ok(Outcome::Success)
}

pub fn audit(a: AuditArgs) -> CliResult {
    if !Path::new(&a.results_dir).is_dir() {
        return Err(CliError::Config(format!("{} is not a directory", a.results_dir.display())));
    }
    let report = audit_dir(&a.results_dir)?;
    let findings: Vec<_> = report
        .findings
        .iter()
        .map(|f| json!({ "run_id": f.run_id, "test_fold": f.test_fold, "message": f.message }))
        .collect();
    print_json(&json!({
        "manifests": report.manifests.len(),
        "fold_runs": report.fold_runs,
        "exemplars_checked": report.exemplars_checked,
        "findings": findings,
    }));
    if report.is_clean() {
        Ok(Outcome::Success)
    } else {
        Err(CliError::Data(format!("{} exemplar/test overlap finding(s)", report.findings.len())))
    }
}
