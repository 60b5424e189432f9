//! Time-frequency representations: STFT magnitude, decibel scaling, mel
//! spectrograms and MFCCs.

mod config;
mod mel;
mod stft;

pub use config::{AmpScale, ColormapName, Detail, FreqAxis, SpectrogramConfig, Style, Window};
pub use mel::{apply_filterbank, dct_ii_ortho, hz_to_mel, mel_filterbank, mel_spectrogram, mel_to_hz, mfcc};
pub use stft::{stft_magnitude, stft_magnitude_samples, stft_with};

use serde::{Deserialize, Serialize};

use crate::dataset::AudioClip;
use crate::error::{Error, Result};
use crate::resample::{ResamplerSpec, RESAMPLER_SPEC};

/// Floor applied before taking logarithms.
pub const DB_FLOOR: f64 = 1e-10;
/// Dynamic range kept below the reference (maximum) value.
pub const TOP_DB: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    LinearMagnitude,
    Db,
    MelPower,
    MelPowerDb,
    MfccCoeff,
}

/// 2-D time-frequency values stored row-major as `[bin][frame]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramMatrix {
    pub values: Vec<f64>,
    pub n_bins: usize,
    pub n_frames: usize,
    /// Bin centre frequencies in Hz, or coefficient indices for MFCCs.
    pub bin_frequencies_hz: Vec<f64>,
    pub frame_times_s: Vec<f64>,
    pub unit: Unit,
}

impl SpectrogramMatrix {
    pub fn new(
        values: Vec<f64>,
        n_bins: usize,
        n_frames: usize,
        bin_frequencies_hz: Vec<f64>,
        frame_times_s: Vec<f64>,
        unit: Unit,
    ) -> Result<Self> {
        if values.len() != n_bins * n_frames
            || bin_frequencies_hz.len() != n_bins
            || frame_times_s.len() != n_frames
        {
            return Err(Error::Validation(format!(
                "matrix shape mismatch: {} values for {n_bins}x{n_frames}, {} bins, {} frames",
                values.len(),
                bin_frequencies_hz.len(),
                frame_times_s.len()
            )));
        }
        Ok(SpectrogramMatrix { values, n_bins, n_frames, bin_frequencies_hz, frame_times_s, unit })
    }

    #[inline]
    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.values[bin * self.n_frames + frame]
    }

    pub fn row(&self, bin: usize) -> &[f64] {
        &self.values[bin * self.n_frames..(bin + 1) * self.n_frames]
    }

    pub fn column(&self, frame: usize) -> Vec<f64> {
        (0..self.n_bins).map(|b| self.get(b, frame)).collect()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Converts magnitudes (20·log10) or mel powers (10·log10) to decibels
/// relative to the global maximum, clipped at `-top_db`.
///
/// An all-zero matrix maps to a uniform `-top_db`.
pub fn to_db(m: &SpectrogramMatrix, top_db: f64) -> Result<SpectrogramMatrix> {
    let (factor, unit) = match m.unit {
        Unit::LinearMagnitude => (20.0, Unit::Db),
        Unit::MelPower => (10.0, Unit::MelPowerDb),
        other => return Err(Error::Config(format!("to_db expects linear input, got {other:?}"))),
    };
    let reference = m.values.iter().copied().fold(0.0f64, f64::max);
    let values = if reference <= 0.0 {
        vec![-top_db; m.values.len()]
    } else {
        let ref_db = factor * reference.max(DB_FLOOR).log10();
        m.values
            .iter()
            .map(|&v| (factor * v.max(DB_FLOOR).log10() - ref_db).max(-top_db))
            .collect()
    };
    Ok(SpectrogramMatrix { values, unit, ..m.clone() })
}

/// Processing choices that affect every rendered image; recorded in run
/// manifests and folded into every config hash.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DspDecisions {
    pub window_periodic: bool,
    pub framing: &'static str,
    pub db_floor: f64,
    pub top_db: f64,
    pub magnitude_db_factor: f64,
    pub power_db_factor: f64,
    pub mel_scale: &'static str,
    pub mel_norm: &'static str,
    pub mel_fmin_hz: f64,
    pub mel_fmax: &'static str,
    pub mfcc_dct: &'static str,
    pub mfcc_input: &'static str,
    pub normalization: &'static str,
    pub constant_matrix_value: f64,
    pub log_axis_start: &'static str,
    pub log_axis_styles: &'static str,
    pub row_mapping: &'static str,
    pub resampler: ResamplerSpec,
    pub stereo_to_mono: &'static str,
    pub clip_seconds: f64,
}

pub const DSP_DECISIONS: DspDecisions = DspDecisions {
    window_periodic: true,
    framing: "centered, reflect padding of n_fft/2 on both ends",
    db_floor: DB_FLOOR,
    top_db: TOP_DB,
    magnitude_db_factor: 20.0,
    power_db_factor: 10.0,
    mel_scale: "slaney",
    mel_norm: "slaney (area normalised)",
    mel_fmin_hz: 0.0,
    mel_fmax: "sample_rate/2",
    mfcc_dct: "type-II orthonormal",
    mfcc_input: "mel power in dB (top_db applied)",
    normalization: "per-image min-max",
    constant_matrix_value: 0.0,
    log_axis_start: "first nonzero STFT bin",
    log_axis_styles: "amplitude only; mel rows and MFCC coefficients use their native index axis",
    row_mapping: "nearest bin",
    resampler: RESAMPLER_SPEC,
    stereo_to_mono: "arithmetic mean of channels",
    clip_seconds: crate::dataset::CLIP_SECONDS,
};

/// Computes the matrix `cfg.style` and `cfg.amp_scale` call for.
pub fn spectrogram(clip: &AudioClip, cfg: &SpectrogramConfig) -> Result<SpectrogramMatrix> {
    cfg.validate()?;
    match cfg.style {
        Style::Amplitude => {
            let m = stft_magnitude(clip, cfg)?;
            match cfg.amp_scale {
                AmpScale::LogDb => to_db(&m, TOP_DB),
                AmpScale::Linear => Ok(m),
            }
        }
        Style::Mel => mel_spectrogram(clip, cfg),
        Style::Mfcc => mfcc(clip, cfg),
    }
}
