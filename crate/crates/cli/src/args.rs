use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vsc_core::dsp::{AmpScale, ColormapName, Detail, FreqAxis, Style, Window};
use vsc_core::SpectrogramConfig;

#[derive(Debug, Parser)]
#[command(name = "vscbench", version, about = "Visual spectrogram classification benchmark")]
pub struct Cli {
    /// Log filter for stderr (overridden by RUST_LOG).
    #[arg(long, global = true, default_value = "info")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic ESC-layout corpus for offline runs.
    Synth(SynthArgs),
    /// Render spectrogram images for the selected clips.
    Render(RenderArgs),
    /// Select few-shot exemplars for one test fold.
    Exemplars(ExemplarArgs),
    /// Run a zero- or few-shot evaluation.
    Eval(EvalArgs),
    /// Zero-shot evaluation over the nine-variant rendering ablation grid.
    Sweep(SweepArgs),
    /// Host the expert annotation study.
    Serve(ServeArgs),
    /// Agreement, per-expert accuracy and ensemble over finalized sessions.
    StudyReport(StudyReportArgs),
    /// Check every run manifest under a directory for exemplar/test overlap.
    Audit(AuditArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum View {
    /// ESC-10 clips, all folds.
    Esc10,
    /// Two fold-1 clips per ESC-50 category; exemplars from all 50 classes.
    Esc50Subset,
}

#[derive(Debug, Clone, Args)]
pub struct DatasetArgs {
    /// Dataset root with `audio/` and `meta/esc50.csv`.
    #[arg(long)]
    pub dataset_root: PathBuf,
    /// Manifest path (default: <dataset-root>/meta/esc50.csv).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "esc10")]
    pub view: View,
    /// Seed for the ESC-50 subset draw.
    #[arg(long, default_value_t = 7)]
    pub subset_seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    #[arg(long, default_value = "amplitude")]
    pub style: Style,
    #[arg(long, default_value = "log_db")]
    pub amp_scale: AmpScale,
    #[arg(long, default_value = "log")]
    pub freq_axis: FreqAxis,
    #[arg(long, default_value = "viridis")]
    pub colormap: ColormapName,
    /// Drop axes, ticks and titles.
    #[arg(long)]
    pub no_labels: bool,
    #[arg(long)]
    pub colorbar: bool,
    #[arg(long, default_value_t = 2048)]
    pub n_fft: usize,
    #[arg(long, default_value_t = 512)]
    pub hop: usize,
    #[arg(long, default_value = "hann")]
    pub window: Window,
    #[arg(long, default_value_t = 128)]
    pub n_mels: usize,
    #[arg(long, default_value_t = 20)]
    pub n_mfcc: usize,
    #[arg(long, default_value_t = 640)]
    pub width: u32,
    #[arg(long, default_value_t = 480)]
    pub height: u32,
    #[arg(long, default_value = "standard")]
    pub detail: Detail,
    /// Directory holding one `<config_hash>/` corpus per configuration.
    #[arg(long, default_value = "images")]
    pub image_root: PathBuf,
    /// Run data-parallel loops sequentially.
    #[arg(long)]
    pub sequential: bool,
}

impl ConfigArgs {
    pub fn config(&self) -> SpectrogramConfig {
        SpectrogramConfig {
            style: self.style,
            amp_scale: self.amp_scale,
            freq_axis: self.freq_axis,
            colormap: self.colormap,
            show_labels: !self.no_labels,
            show_colorbar: self.colorbar,
            n_fft: self.n_fft,
            hop: self.hop,
            window: self.window,
            n_mels: self.n_mels,
            n_mfcc: self.n_mfcc,
            image_width_px: self.width,
            image_height_px: self.height,
            detail: self.detail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SelectArg {
    Random,
    Kmeans,
    Handpicked,
}

#[derive(Debug, Clone, Args)]
pub struct ShotArgs {
    /// Total exemplars, a multiple of the class count; 0 is zero-shot.
    #[arg(long, default_value_t = 0)]
    pub shots: usize,
    #[arg(long, value_enum, default_value = "kmeans")]
    pub select: SelectArg,
    /// Clustering feature for k-means selection.
    #[arg(long, default_value = "mel")]
    pub feature: vsc_core::exemplars::Feature,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// `category: file[, file...]` listing for hand-picked selection.
    #[arg(long)]
    pub handpicked: Option<PathBuf>,
    /// Exemplar selection seed (random draw and k-means initialisation).
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 44_100)]
    pub rate: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write audio for all 50 classes, not only ESC-10.
    #[arg(long)]
    pub all_classes: bool,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Folds to render (repeatable; default all).
    #[arg(long)]
    pub fold: Vec<u8>,
    /// Render one corpus per ablation variant instead of the given config.
    #[arg(long)]
    pub ablation_grid: bool,
}

#[derive(Debug, Args)]
pub struct ExemplarArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub shots: ShotArgs,
    #[arg(long, default_value_t = 1)]
    pub fold: u8,
    /// Write the set here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Args)]
pub struct QueryArgs {
    /// openai, anthropic, gemini or mock.
    #[arg(long)]
    pub provider: String,
    /// Model id (mock defaults to nearest-exemplar).
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, default_value = "cache")]
    pub cache_dir: PathBuf,
    /// Results land in <out-dir>/<run_id>/.
    #[arg(long, default_value = "results")]
    pub out_dir: PathBuf,
    /// Headline accuracy over answered items or all items.
    #[arg(long, default_value = "all")]
    pub accounting: vsc_core::eval::Accounting,
    /// Log request and response bodies (credentials redacted).
    #[arg(long)]
    pub debug_wire: bool,
    /// Print request counts and payload size without querying.
    #[arg(long)]
    pub dry_run: bool,
    /// Serve from cache only; misses become transport errors.
    #[arg(long)]
    pub offline: bool,
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    #[arg(long, default_value_t = 120)]
    pub timeout_secs: u64,
    /// Recorded in the manifest for downstream ensembling.
    #[arg(long, default_value_t = 0)]
    pub tie_break_seed: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub shots: ShotArgs,
    #[command(flatten)]
    pub query: QueryArgs,
    /// Test fold (repeatable).
    #[arg(long)]
    pub fold: Vec<u8>,
    /// Evaluate all five folds and pool the results.
    #[arg(long, conflicts_with = "fold")]
    pub cross_validate: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub query: QueryArgs,
    #[arg(long, default_value_t = 1)]
    pub fold: u8,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub shots: ShotArgs,
    #[arg(long, default_value_t = 1)]
    pub fold: u8,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "sessions")]
    pub sessions_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct StudyReportArgs {
    #[arg(long, default_value = "sessions")]
    pub sessions_dir: PathBuf,
    #[arg(long, default_value = "study")]
    pub out: PathBuf,
    #[arg(long, default_value = "all")]
    pub accounting: vsc_core::eval::Accounting,
    #[arg(long, default_value_t = 0)]
    pub tie_break_seed: u64,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long, default_value = "results")]
    pub results_dir: PathBuf,
}
