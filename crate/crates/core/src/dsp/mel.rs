use super::{stft_magnitude, to_db, AmpScale, SpectrogramConfig, SpectrogramMatrix, Unit, TOP_DB};
use crate::dataset::AudioClip;
use crate::error::{Error, Result};

const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn log_step() -> f64 {
    6.4f64.ln() / 27.0
}

/// Slaney mel scale: linear below 1 kHz, logarithmic above.
pub fn hz_to_mel(hz: f64) -> f64 {
    if hz < MIN_LOG_HZ {
        hz / F_SP
    } else {
        MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / log_step()
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    if mel < MIN_LOG_MEL {
        mel * F_SP
    } else {
        MIN_LOG_HZ * (log_step() * (mel - MIN_LOG_MEL)).exp()
    }
}

/// Triangular mel filterbank, `n_mels` rows by `n_fft/2 + 1` columns, with
/// Slaney area normalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub weights: Vec<f64>,
    pub n_mels: usize,
    pub n_bins: usize,
    pub centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn weight(&self, mel: usize, bin: usize) -> f64 {
        self.weights[mel * self.n_bins + bin]
    }

    pub fn row(&self, mel: usize) -> &[f64] {
        &self.weights[mel * self.n_bins..(mel + 1) * self.n_bins]
    }
}

pub fn mel_filterbank(rate_hz: u32, n_fft: usize, n_mels: usize, fmin: f64, fmax: f64) -> Result<MelFilterbank> {
    let n_bins = n_fft / 2 + 1;
    if n_mels == 0 || n_mels > n_bins {
        return Err(Error::Config(format!("n_mels {n_mels} must be in 1..={n_bins}")));
    }
    let mel_lo = hz_to_mel(fmin);
    let mel_hi = hz_to_mel(fmax);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let fft_hz: Vec<f64> = (0..n_bins).map(|b| b as f64 * rate_hz as f64 / n_fft as f64).collect();
    let mut weights = vec![0.0; n_mels * n_bins];
    for m in 0..n_mels {
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let enorm = 2.0 / (hi - lo);
        for (b, &f) in fft_hz.iter().enumerate() {
            let rising = (f - lo) / (mid - lo);
            let falling = (hi - f) / (hi - mid);
            weights[m * n_bins + b] = rising.min(falling).max(0.0) * enorm;
        }
    }
    Ok(MelFilterbank { weights, n_mels, n_bins, centers_hz: edges[1..=n_mels].to_vec() })
}

/// `filterbank × power`, restricted to each filter's nonzero support.
pub fn apply_filterbank(fb: &MelFilterbank, power: &SpectrogramMatrix) -> Result<Vec<f64>> {
    if power.n_bins != fb.n_bins {
        return Err(Error::Config(format!(
            "filterbank expects {} bins, matrix has {}",
            fb.n_bins, power.n_bins
        )));
    }
    let frames = power.n_frames;
    let mut out = vec![0.0; fb.n_mels * frames];
    for m in 0..fb.n_mels {
        let dst = &mut out[m * frames..(m + 1) * frames];
        for (b, &w) in fb.row(m).iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, &p) in dst.iter_mut().zip(power.row(b)) {
                *o += w * p;
            }
        }
    }
    Ok(out)
}

fn mel_power(clip: &AudioClip, cfg: &SpectrogramConfig) -> Result<SpectrogramMatrix> {
    cfg.validate()?;
    let mag = stft_magnitude(clip, cfg)?;
    let power = SpectrogramMatrix {
        values: mag.values.iter().map(|v| v * v).collect(),
        ..mag
    };
    let fb = mel_filterbank(clip.sample_rate_hz, cfg.n_fft, cfg.n_mels, 0.0, clip.sample_rate_hz as f64 / 2.0)?;
    let values = apply_filterbank(&fb, &power)?;
    SpectrogramMatrix::new(values, fb.n_mels, power.n_frames, fb.centers_hz, power.frame_times_s, Unit::MelPower)
}

/// Mel power spectrogram, converted to dB when `cfg.amp_scale` is `log_db`.
pub fn mel_spectrogram(clip: &AudioClip, cfg: &SpectrogramConfig) -> Result<SpectrogramMatrix> {
    let m = mel_power(clip, cfg)?;
    match cfg.amp_scale {
        AmpScale::LogDb => to_db(&m, TOP_DB),
        AmpScale::Linear => Ok(m),
    }
}

/// Orthonormal DCT-II of `x`, keeping the first `n_out` coefficients.
pub fn dct_ii_ortho(x: &[f64], n_out: usize) -> Vec<f64> {
    let n = x.len();
    let nf = n as f64;
    (0..n_out.min(n))
        .map(|k| {
            let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &v)| v * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos())
                .sum();
            scale * s
        })
        .collect()
}

/// MFCCs: orthonormal DCT-II of the dB mel spectrogram along frequency.
pub fn mfcc(clip: &AudioClip, cfg: &SpectrogramConfig) -> Result<SpectrogramMatrix> {
    let log_mel = to_db(&mel_power(clip, cfg)?, TOP_DB)?;
    mfcc_from_log_mel(&log_mel, cfg.n_mfcc)
}

pub(crate) fn mfcc_from_log_mel(log_mel: &SpectrogramMatrix, n_mfcc: usize) -> Result<SpectrogramMatrix> {
    let n_mels = log_mel.n_bins;
    if n_mfcc == 0 || n_mfcc > n_mels {
        return Err(Error::Config(format!("n_mfcc {n_mfcc} must be in 1..={n_mels}")));
    }
    let frames = log_mel.n_frames;
    let nf = n_mels as f64;
    let basis: Vec<f64> = (0..n_mfcc)
        .flat_map(|k| {
            let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            (0..n_mels).map(move |i| {
                scale * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos()
            })
        })
        .collect();
    let mut values = vec![0.0; n_mfcc * frames];
    for k in 0..n_mfcc {
        let b = &basis[k * n_mels..(k + 1) * n_mels];
        for t in 0..frames {
            values[k * frames + t] = b.iter().enumerate().map(|(i, w)| w * log_mel.get(i, t)).sum();
        }
    }
    SpectrogramMatrix::new(
        values,
        n_mfcc,
        frames,
        (0..n_mfcc).map(|k| k as f64).collect(),
        log_mel.frame_times_s.clone(),
        Unit::MfccCoeff,
    )
}
