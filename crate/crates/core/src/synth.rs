//! Synthetic corpus in the ESC-50 layout, for offline end-to-end runs.
//!
//! Each category gets a distinct signature (harmonic tone, band-limited
//! noise bursts or a click train at a category-specific frequency and
//! modulation rate); clips jitter those parameters under a per-file seed.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{write_manifest, ClipMeta, CLIP_SECONDS, ESC10_CLASSES, ESC50_CATEGORIES};
use crate::error::{Error, Result};
use crate::hash::salted_seed;
use crate::par::Exec;

pub const CLIPS_PER_FOLD_PER_CLASS: usize = 8;

fn target_of(category: &str) -> u32 {
    ESC50_CATEGORIES.iter().position(|c| *c == category).expect("known category") as u32
}

/// 2000-row manifest: 50 categories × 5 folds × 8 clips, ESC-10 classes
/// listed first within each fold so their first-appearance order matches
/// [`ESC10_CLASSES`].
pub fn synth_manifest() -> Vec<ClipMeta> {
    let mut order: Vec<&str> = ESC10_CLASSES.to_vec();
    order.extend(ESC50_CATEGORIES.iter().filter(|c| !ESC10_CLASSES.contains(c)));
    let mut rows = Vec::with_capacity(2000);
    let mut src = 100_000u32;
    for fold in 1..=5u8 {
        for category in &order {
            for _ in 0..CLIPS_PER_FOLD_PER_CLASS {
                src += 1;
                let target = target_of(category);
                rows.push(ClipMeta {
                    filename: format!("{fold}-{src}-A-{target}.wav"),
                    fold,
                    target,
                    category: category.to_string(),
                    esc10: ESC10_CLASSES.contains(category),
                });
            }
        }
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Signature {
    kind: u32,
    freq_hz: f64,
    mod_hz: f64,
}

fn signature(target: u32) -> Signature {
    let t = target as f64;
    Signature {
        kind: target % 3,
        // log-spaced across 150 Hz .. 7 kHz, interleaved so neighbours differ
        freq_hz: 150.0 * (7000.0f64 / 150.0).powf(((target * 17) % 50) as f64 / 49.0),
        mod_hz: 0.5 + (t * 7.0) % 11.0,
    }
}

/// Deterministic clip for `meta` at `rate_hz`, peak-limited to 0.9.
pub fn synth_clip(meta: &ClipMeta, rate_hz: u32, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(salted_seed(&meta.filename, seed));
    let sig = signature(meta.target);
    let n = (CLIP_SECONDS * rate_hz as f64).round() as usize;
    let fs = rate_hz as f64;
    let freq = (sig.freq_hz * rng.gen_range(0.96..1.04)).min(fs * 0.45);
    let mod_hz = sig.mod_hz * rng.gen_range(0.9..1.1);
    let phase = rng.gen_range(0.0..TAU);
    let gain = rng.gen_range(0.3..0.8);
    let floor = rng.gen_range(0.005..0.02);
    let envelope = |i: usize| 0.5 + 0.5 * (TAU * mod_hz * i as f64 / fs + phase).sin();
    let mut out = vec![0.0; n];
    match sig.kind {
        0 => {
            for (i, o) in out.iter_mut().enumerate() {
                let t = i as f64 / fs;
                let tone: f64 = (1..=4).map(|h| (TAU * freq * h as f64 * t).sin() / h as f64).sum();
                *o = gain * envelope(i) * tone * 0.5;
            }
        }
        1 => {
            // two-pole resonator over white noise
            let r = 0.995;
            let w = TAU * freq / fs;
            let (a1, a2) = (2.0 * r * w.cos(), -r * r);
            let (mut y1, mut y2) = (0.0, 0.0);
            for (i, o) in out.iter_mut().enumerate() {
                let x: f64 = rng.gen_range(-1.0..1.0);
                let y = x * (1.0 - r) + a1 * y1 + a2 * y2;
                y2 = y1;
                y1 = y;
                *o = gain * envelope(i) * y * 8.0;
            }
        }
        _ => {
            let period = (fs / (mod_hz * 4.0)).max(1.0) as usize;
            let decay = (-freq / fs * 20.0).exp();
            let mut level = 0.0;
            for (i, o) in out.iter_mut().enumerate() {
                if i % period == 0 {
                    level = gain;
                }
                *o = level * (TAU * freq * i as f64 / fs).sin();
                level *= decay;
            }
        }
    }
    for o in out.iter_mut() {
        *o += floor * rng.gen_range(-1.0..1.0);
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.9 {
        out.iter_mut().for_each(|v| *v *= 0.9 / peak);
    }
    out
}

pub fn write_wav_i16(path: &Path, samples: &[f64], rate_hz: u32) -> Result<()> {
    let spec = hound::WavSpec { channels: 1, sample_rate: rate_hz, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
    let codec = |e: hound::Error| Error::Decode { path: path.to_path_buf(), message: e.to_string() };
    let mut w = hound::WavWriter::create(path, spec).map_err(codec)?;
    for &s in samples {
        w.write_sample((s.clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16).map_err(codec)?;
    }
    w.finalize().map_err(codec)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub rate_hz: u32,
    pub seed: u64,
    /// Write audio for ESC-10 rows only; the manifest always has all rows.
    pub esc10_only: bool,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions { rate_hz: 44_100, seed: 0, esc10_only: true }
    }
}

/// Writes `<root>/meta/esc50.csv` and `<root>/audio/*.wav`; returns the manifest path.
pub fn write_corpus(root: &Path, opts: &SynthOptions, exec: Exec) -> Result<PathBuf> {
    let audio = root.join("audio");
    let meta = root.join("meta");
    for d in [&audio, &meta] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let rows = synth_manifest();
    let todo: Vec<&ClipMeta> = rows.iter().filter(|m| m.esc10 || !opts.esc10_only).collect();
    exec.try_map(&todo, |m| write_wav_i16(&audio.join(&m.filename), &synth_clip(m, opts.rate_hz, opts.seed), opts.rate_hz))?;
    let manifest = meta.join("esc50.csv");
    write_manifest(&manifest, &rows)?;
    tracing::info!(clips = todo.len(), root = %root.display(), "synthetic corpus written");
    Ok(manifest)
}
