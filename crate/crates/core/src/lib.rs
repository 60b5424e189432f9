//! Visual spectrogram classification benchmark core.
//!
//! The crate turns ESC-layout audio datasets into deterministic spectrogram
//! images, selects few-shot exemplars, builds prompts for vision-language
//! model providers, and scores the answers.
//!
//! ```text
//! dataset -> dsp -> render -> exemplars -> vlm -> eval
//! ```
//!
//! Data-parallel loops (clip loading, STFT frames, rendering, K-means
//! assignment) run on rayon when the `parallel` feature is enabled (the
//! default) and fall back to plain iterators otherwise. Every parallel path
//! produces bit-identical output to the sequential one.

pub mod dataset;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod exemplars;
pub mod hash;
pub mod manifest;
pub mod par;
pub mod pipeline;
pub mod render;
pub mod resample;
pub mod synth;
pub mod vlm;

pub use dataset::{AudioClip, ClipMeta};
pub use dsp::{SpectrogramConfig, SpectrogramMatrix};
pub use error::{Error, Result};
pub use eval::{EvalResult, PredictionRecord};
pub use exemplars::ExemplarSet;
pub use par::Exec;
pub use render::RenderedSpectrogram;
pub use vlm::{ModelResponse, Prompt, ResponseStatus};

/// Tool version recorded in every run manifest.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
