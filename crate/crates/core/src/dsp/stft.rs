use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{SpectrogramConfig, SpectrogramMatrix, Unit, Window};
use crate::dataset::AudioClip;
use crate::error::{Error, Result};
use crate::par::Exec;

/// Index into a signal reflected about its end points (numpy "reflect" mode).
fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= n as isize {
        j = period - j;
    }
    j as usize
}

pub fn stft_magnitude(clip: &AudioClip, cfg: &SpectrogramConfig) -> Result<SpectrogramMatrix> {
    stft_magnitude_samples(&clip.samples, clip.sample_rate_hz, cfg)
}

pub fn stft_magnitude_samples(samples: &[f64], rate_hz: u32, cfg: &SpectrogramConfig) -> Result<SpectrogramMatrix> {
    stft_with(samples, rate_hz, cfg.n_fft, cfg.hop, cfg.window, Exec::default())
}

/// Centered STFT magnitude: frame `t` covers padded samples
/// `[t*hop, t*hop + n_fft)` of the signal reflect-padded by `n_fft/2`.
pub fn stft_with(
    samples: &[f64],
    rate_hz: u32,
    n_fft: usize,
    hop: usize,
    window: Window,
    exec: Exec,
) -> Result<SpectrogramMatrix> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("stft of an empty signal".into()));
    }
    if hop == 0 || hop > n_fft {
        return Err(Error::Config(format!("hop {hop} must be in 1..={n_fft}")));
    }
    let n = samples.len();
    let n_frames = 1 + n / hop;
    let n_bins = n_fft / 2 + 1;
    let pad = (n_fft / 2) as isize;
    let win = window.coefficients(n_fft);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);

    // frame-major scratch, transposed to [bin][frame] below
    let mut by_frame = vec![0.0; n_frames * n_bins];
    exec.for_each_chunk_mut(&mut by_frame, n_bins, |t, out| {
        let start = (t * hop) as isize - pad;
        let mut buf: Vec<Complex<f64>> = (0..n_fft)
            .map(|i| {
                let idx = start + i as isize;
                let x = if idx >= 0 && (idx as usize) < n {
                    samples[idx as usize]
                } else {
                    samples[reflect_index(idx, n)]
                };
                Complex::new(x * win[i], 0.0)
            })
            .collect();
        fft.process(&mut buf);
        for (o, c) in out.iter_mut().zip(&buf[..n_bins]) {
            *o = c.norm();
        }
    });

    let mut values = vec![0.0; n_bins * n_frames];
    for t in 0..n_frames {
        for b in 0..n_bins {
            values[b * n_frames + t] = by_frame[t * n_bins + b];
        }
    }
    let bin_hz = rate_hz as f64 / n_fft as f64;
    SpectrogramMatrix::new(
        values,
        n_bins,
        n_frames,
        (0..n_bins).map(|b| b as f64 * bin_hz).collect(),
        (0..n_frames).map(|t| (t * hop) as f64 / rate_hz as f64).collect(),
        Unit::LinearMagnitude,
    )
}
