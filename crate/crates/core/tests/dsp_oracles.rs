mod common;

use common::oracles::{dft_magnitudes, hann, random_signal, reflect_pad};
use proptest::prelude::*;
use vsc_core::dsp::{apply_filterbank, dct_ii_ortho, mel_filterbank, stft_with, to_db, Unit, Window};
use vsc_core::resample::Resampler;
use vsc_core::{Exec, SpectrogramMatrix};

#[test]
fn oracle_suite() {
    common::dsp_oracle_check().assert();
}

#[test]
fn frame_counts() {
    common::frame_count_check().assert();
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stft_matches_direct_dft(
        log_n in 4u32..7,
        hop_frac in 1usize..=4,
        extra in 0usize..200,
        seed in any::<u64>(),
    ) {
        let n_fft = 1usize << log_n;
        let hop = (n_fft * hop_frac / 4).max(1);
        let x = random_signal(n_fft + extra, seed);
        let m = stft_with(&x, 8000, n_fft, hop, Window::Hann, Exec::Sequential).unwrap();
        prop_assert_eq!(m.n_frames, 1 + x.len() / hop);
        prop_assert_eq!(m.n_bins, n_fft / 2 + 1);
        let padded = reflect_pad(&x, n_fft / 2);
        let w = hann(n_fft);
        for t in 0..m.n_frames {
            let frame: Vec<f64> = (0..n_fft).map(|i| padded[t * hop + i] * w[i]).collect();
            for (a, b) in m.column(t).iter().zip(dft_magnitudes(&frame)) {
                prop_assert!(rel_close(*a, b, 1e-9), "frame {} {} vs {}", t, a, b);
            }
        }
    }

    #[test]
    fn parseval_with_rectangular_window(log_n in 3u32..8, seed in any::<u64>()) {
        let n = 1usize << log_n;
        let x = random_signal(4 * n, seed);
        let m = stft_with(&x, 8000, n, n, Window::Rectangular, Exec::Sequential).unwrap();
        let padded = reflect_pad(&x, n / 2);
        for t in 0..m.n_frames {
            let col = m.column(t);
            let spec = col[0].powi(2) + col[n / 2].powi(2) + 2.0 * col[1..n / 2].iter().map(|v| v * v).sum::<f64>();
            let time: f64 = padded[t * n..t * n + n].iter().map(|v| v * v).sum();
            prop_assert!(rel_close(spec / n as f64, time, 1e-9));
        }
    }

    #[test]
    fn magnitude_scales_linearly(a in -8.0f64..8.0, seed in any::<u64>()) {
        let x = random_signal(300, seed);
        let y: Vec<f64> = x.iter().map(|v| a * v).collect();
        let mx = stft_with(&x, 8000, 64, 16, Window::Hann, Exec::Sequential).unwrap();
        let my = stft_with(&y, 8000, 64, 16, Window::Hann, Exec::Sequential).unwrap();
        for (p, q) in mx.values.iter().zip(&my.values) {
            prop_assert!((q - a.abs() * p).abs() <= 1e-9 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn parallel_stft_is_bit_identical(seed in any::<u64>(), len in 64usize..3000) {
        let x = random_signal(len, seed);
        let s = stft_with(&x, 22050, 64, 16, Window::Hann, Exec::Sequential).unwrap();
        let p = stft_with(&x, 22050, 64, 16, Window::Hann, Exec::Parallel).unwrap();
        prop_assert_eq!(s, p);
    }

    #[test]
    fn filterbank_is_a_matrix_product(seed in any::<u64>(), frames in 1usize..12, n_mels in 1usize..40) {
        let n_fft = 256;
        let fb = mel_filterbank(22050, n_fft, n_mels, 0.0, 11025.0).unwrap();
        let bins = n_fft / 2 + 1;
        let values: Vec<f64> = random_signal(bins * frames, seed).into_iter().map(|v| v * v).collect();
        let power = SpectrogramMatrix::new(values, bins, frames, vec![0.0; bins], vec![0.0; frames], Unit::MelPower).unwrap();
        let out = apply_filterbank(&fb, &power).unwrap();
        for m in 0..n_mels {
            for t in 0..frames {
                let direct: f64 = (0..bins).map(|b| fb.weight(m, b) * power.get(b, t)).sum();
                prop_assert!(rel_close(out[m * frames + t], direct, 1e-12));
            }
        }
        prop_assert!(fb.weights.iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn orthonormal_dct_preserves_energy(seed in any::<u64>(), n in 1usize..64) {
        let x = random_signal(n, seed);
        let y = dct_ii_ortho(&x, n);
        let ex: f64 = x.iter().map(|v| v * v).sum();
        let ey: f64 = y.iter().map(|v| v * v).sum();
        prop_assert!(rel_close(ex, ey, 1e-10));
    }

    #[test]
    fn decibels_are_clipped_below_the_peak(seed in any::<u64>(), top in 10.0f64..120.0) {
        let values: Vec<f64> = random_signal(200, seed).into_iter().map(f64::abs).collect();
        let m = SpectrogramMatrix::new(values, 20, 10, vec![0.0; 20], vec![0.0; 10], Unit::LinearMagnitude).unwrap();
        let db = to_db(&m, top).unwrap();
        let (lo, hi) = db.min_max();
        prop_assert!(hi.abs() < 1e-12);
        prop_assert!(lo >= -top - 1e-12);
    }

    #[test]
    fn resampled_length_and_dc(n in 100usize..4000, level in -0.9f64..0.9) {
        let r = Resampler::new(44_100, 22_050);
        let out = r.process(&vec![level; n]);
        prop_assert_eq!(out.len(), n.div_ceil(2));
        // away from the edges a constant stays constant
        for v in &out[40..out.len().saturating_sub(40).max(40)] {
            prop_assert!((v - level).abs() < 2e-3, "{} vs {}", v, level);
        }
    }
}

#[test]
fn resampling_keeps_in_band_tones() {
    use std::f64::consts::PI;
    for (from, to) in [(44_100u32, 22_050u32), (48_000, 22_050), (16_000, 22_050)] {
        let r = Resampler::new(from, to);
        let f = 1000.0;
        let x: Vec<f64> = (0..from as usize / 2).map(|i| (2.0 * PI * f * i as f64 / from as f64).sin()).collect();
        let y = r.process(&x);
        assert_eq!(y.len(), r.output_len(x.len()));
        let interior = 200..y.len() - 200;
        let err = interior
            .map(|j| (y[j] - (2.0 * PI * f * j as f64 / to as f64).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 5e-3, "{from}->{to}: max err {err}");
    }
}

#[test]
fn resampling_rejects_out_of_band_tones() {
    use std::f64::consts::PI;
    let r = Resampler::new(44_100, 22_050);
    // 15 kHz is above the new Nyquist and must not alias back in
    let x: Vec<f64> = (0..22_050).map(|i| (2.0 * PI * 15_000.0 * i as f64 / 44_100.0).sin()).collect();
    let y = r.process(&x);
    let rms = (y[200..y.len() - 200].iter().map(|v| v * v).sum::<f64>() / (y.len() - 400) as f64).sqrt();
    assert!(rms < 1e-2, "alias rms {rms}");
}
