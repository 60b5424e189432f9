//! Independent oracles for the DSP, render, clustering, prompt and metric
//! criteria.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vsc_core::dataset::{ClipMeta, ESC10_CLASSES};
use vsc_core::dsp::{
    mel_filterbank, mel_spectrogram, mfcc, spectrogram, stft_with, to_db, AmpScale, SpectrogramConfig, Style, Unit,
    Window, TOP_DB,
};
use vsc_core::eval::{cohen_kappa_labels, ensemble_majority, PredictionRecord};
use vsc_core::exemplars::kmeans;
use vsc_core::hash::sha256_hex;
use vsc_core::render::{ablation_grid, render};
use vsc_core::vlm::{build_few_shot_prompt, build_zero_shot_prompt, ImageDetail, Part};
use vsc_core::{AudioClip, Exec, RenderedSpectrogram, SpectrogramMatrix};

use super::{golden, timed, Check};

pub fn clip_of(samples: Vec<f64>, rate: u32) -> AudioClip {
    AudioClip {
        samples,
        sample_rate_hz: rate,
        source: ClipMeta { filename: "oracle.wav".into(), fold: 1, target: 0, category: "dog".into(), esc10: true },
    }
}

pub fn random_signal(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// numpy-style reflect padding (edge sample not repeated).
pub fn reflect_pad(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n + 2 * pad);
    for i in (1..=pad).rev() {
        out.push(x[i]);
    }
    out.extend_from_slice(x);
    for i in 0..pad {
        out.push(x[n - 2 - i]);
    }
    out
}

/// Direct O(n²) DFT magnitudes for bins 0..=n/2.
pub fn dft_magnitudes(frame: &[f64]) -> Vec<f64> {
    let n = frame.len();
    let cos: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).cos()).collect();
    let sin: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).sin()).collect();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, &x) in frame.iter().enumerate() {
                let idx = (k * j) % n;
                re += x * cos[idx];
                im -= x * sin[idx];
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}

pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos())).collect()
}

fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// STFT vs direct DFT over 50 frames, Parseval, filterbank product and DCT.
pub fn dsp_oracle_check() -> Check {
    let (detail, secs) = timed(|| -> Result<String, String> {
        let (n_fft, hop) = (2048usize, 512usize);
        let x = random_signal(hop * 49, 11);
        let m = stft_with(&x, 22_050, n_fft, hop, Window::Hann, Exec::Sequential).map_err(|e| e.to_string())?;
        if m.n_frames != 50 {
            return Err(format!("expected 50 frames, got {}", m.n_frames));
        }
        let padded = reflect_pad(&x, n_fft / 2);
        let w = hann(n_fft);
        let mut stft_err = 0.0f64;
        for t in 0..50 {
            let frame: Vec<f64> = (0..n_fft).map(|i| padded[t * hop + i] * w[i]).collect();
            stft_err = stft_err.max(max_rel_err(&m.column(t), &dft_magnitudes(&frame)));
        }

        let rect = stft_with(&x, 22_050, n_fft, hop, Window::Rectangular, Exec::Sequential).map_err(|e| e.to_string())?;
        let mut parseval_err = 0.0f64;
        for t in 0..50 {
            let col = rect.column(t);
            let spec: f64 = col[0].powi(2)
                + col[n_fft / 2].powi(2)
                + 2.0 * col[1..n_fft / 2].iter().map(|v| v * v).sum::<f64>();
            let energy: f64 = padded[t * hop..t * hop + n_fft].iter().map(|v| v * v).sum();
            parseval_err = parseval_err.max((spec - energy * n_fft as f64).abs() / (energy * n_fft as f64));
        }

        let clip = clip_of(random_signal(22_050, 5), 22_050);
        let mut cfg = SpectrogramConfig { style: Style::Mel, amp_scale: AmpScale::Linear, ..Default::default() };
        let mel = mel_spectrogram(&clip, &cfg).map_err(|e| e.to_string())?;
        let mag = stft_with(&clip.samples, 22_050, 2048, 512, Window::Hann, Exec::Sequential).map_err(|e| e.to_string())?;
        let fb = mel_filterbank(22_050, 2048, 128, 0.0, 11_025.0).map_err(|e| e.to_string())?;
        let mut mel_err = 0.0f64;
        for r in 0..128 {
            for t in 0..mag.n_frames {
                let mut s = 0.0;
                for b in 0..mag.n_bins {
                    s += fb.weight(r, b) * mag.get(b, t) * mag.get(b, t);
                }
                mel_err = mel_err.max((mel.get(r, t) - s).abs() / s.abs().max(1.0));
            }
        }

        cfg.style = Style::Mfcc;
        cfg.amp_scale = AmpScale::LogDb;
        let coeffs = mfcc(&clip, &cfg).map_err(|e| e.to_string())?;
        let log_mel = to_db(&mel, TOP_DB).map_err(|e| e.to_string())?;
        let nm = 128.0f64;
        let mut mfcc_err = 0.0f64;
        for t in 0..log_mel.n_frames {
            for k in 0..20 {
                let mut s = 0.0;
                for i in 0..128 {
                    s += log_mel.get(i, t) * (PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * nm)).cos();
                }
                s *= if k == 0 { (1.0 / nm).sqrt() } else { (2.0 / nm).sqrt() };
                mfcc_err = mfcc_err.max((coeffs.get(k, t) - s).abs() / s.abs().max(1.0));
            }
        }
        let ok = stft_err < 1e-6 && parseval_err < 1e-6 && mel_err < 1e-9 && mfcc_err < 1e-9;
        let text = format!(
            "stft rel err {stft_err:.2e} (<1e-6), parseval {parseval_err:.2e} (<1e-6), mel {mel_err:.2e} (<1e-9), mfcc {mfcc_err:.2e} (<1e-9)"
        );
        if ok { Ok(text) } else { Err(text) }
    });
    let pass = detail.is_ok() && secs < 30.0;
    let text = detail.unwrap_or_else(|e| e);
    Check { name: "DSP oracle suite", pass, detail: format!("{text}; {secs:.1}s (<30s)") }
}

pub fn frame_count_check() -> Check {
    let clip = clip_of(random_signal(110_250, 1), 22_050);
    let shape = |style: Style| {
        let cfg = SpectrogramConfig { style, ..Default::default() };
        spectrogram(&clip, &cfg).map(|m| (m.n_bins, m.n_frames)).unwrap_or((0, 0))
    };
    let (amp, mel, mf) = (shape(Style::Amplitude), shape(Style::Mel), shape(Style::Mfcc));
    Check {
        name: "Frame-count contract",
        pass: amp == (1025, 216) && mel == (128, 216) && mf == (20, 216),
        detail: format!("5.000 s @ 22050 Hz -> amplitude {}x{}, mel {}x{}, mfcc {}x{}", amp.0, amp.1, mel.0, mel.1, mf.0, mf.1),
    }
}

/// Matrix built from integer arithmetic only, so its values are exact on
/// every platform.
pub fn golden_matrix(cfg: &SpectrogramConfig, variant: usize) -> SpectrogramMatrix {
    let (n_bins, freqs, unit): (usize, Vec<f64>, Unit) = match cfg.style {
        Style::Amplitude => {
            let unit = if cfg.amp_scale == AmpScale::LogDb { Unit::Db } else { Unit::LinearMagnitude };
            (1025, (0..1025).map(|b| b as f64 * 22_050.0 / 2048.0).collect(), unit)
        }
        Style::Mel => (128, (0..128).map(|b| 40.0 * b as f64 + 0.9 * (b * b) as f64).collect(), Unit::MelPowerDb),
        Style::Mfcc => (20, (0..20).map(|b| b as f64).collect(), Unit::MfccCoeff),
    };
    let n_frames = 216;
    let times: Vec<f64> = (0..n_frames).map(|t| (t * 512) as f64 / 22_050.0).collect();
    let values: Vec<f64> = (0..n_bins)
        .flat_map(|b| {
            (0..n_frames).map(move |t| match variant {
                0 => ((b * 7 + t * 13) % 97) as f64 - 80.0,
                1 => (b * 3) as f64 - (t as f64) * 0.5,
                2 => ((b / 8 + t / 12) % 2) as f64 * 40.0 + (b % 5) as f64,
                _ => -12.5,
            })
        })
        .collect();
    SpectrogramMatrix::new(values, n_bins, n_frames, freqs, times, unit).expect("golden matrix shape")
}

pub const GOLDEN_VARIANTS: [&str; 4] = ["modular", "ramp", "checker", "constant"];
pub const BLESS_VAR: &str = "VSC_BLESS_GOLDEN";

pub fn golden_hashes() -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for v in ablation_grid(&SpectrogramConfig::default()) {
        for (i, name) in GOLDEN_VARIANTS.iter().enumerate() {
            let m = golden_matrix(&v.config, i);
            let r: RenderedSpectrogram = render(&m, &v.config).expect("golden render");
            out.insert(format!("{}/{}", v.slug, name), sha256_hex(&r.image_bytes));
        }
    }
    out
}

/// Renders the golden corpus and compares against committed hashes; with
/// `VSC_BLESS_GOLDEN=1` the committed file is rewritten instead.
pub fn render_golden_check() -> Check {
    let path = golden().join("render_hashes.json");
    let got = golden_hashes();
    if std::env::var(BLESS_VAR).is_ok_and(|v| v == "1") {
        let text = serde_json::to_string_pretty(&got).unwrap() + "\n";
        std::fs::write(&path, text).expect("write golden hashes");
    }
    let want: BTreeMap<String, String> = match std::fs::read(&path) {
        Ok(b) => serde_json::from_slice(&b).unwrap_or_default(),
        Err(_) => BTreeMap::new(),
    };
    let mismatched: Vec<&String> = got.keys().filter(|k| want.get(*k) != got.get(*k)).collect();
    let configs: std::collections::BTreeSet<&str> = got.keys().filter_map(|k| k.split('/').next()).collect();
    Check {
        name: "Render determinism",
        pass: want.len() == got.len() && mismatched.is_empty() && got.len() >= 20 && configs.len() == 9,
        detail: format!(
            "{} (matrix, config) pairs over {} configs, {} mismatches against {} committed hashes; verified on {}-{} only",
            got.len(),
            configs.len(),
            mismatched.len(),
            want.len(),
            std::env::consts::OS,
            std::env::consts::ARCH
        ),
    }
}

fn exhaustive_optimum(points: &[[f64; 2]], k: usize) -> f64 {
    let n = points.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut cnt = vec![0.0; k];
        let mut sx = vec![0.0; k];
        let mut sy = vec![0.0; k];
        let mut sq = vec![0.0; k];
        for (p, &l) in points.iter().zip(&labels) {
            cnt[l] += 1.0;
            sx[l] += p[0];
            sy[l] += p[1];
            sq[l] += p[0] * p[0] + p[1] * p[1];
        }
        let sse: f64 = (0..k).filter(|&c| cnt[c] > 0.0).map(|c| sq[c] - (sx[c] * sx[c] + sy[c] * sy[c]) / cnt[c]).sum();
        best = best.min(sse);
        // odometer over labels[1..]; point 0 stays in cluster 0 by symmetry
        let mut i = 1;
        while i < n {
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

/// Direct SSE of points around their cluster means.
fn sse_of(points: &[[f64; 2]], labels: &[usize], k: usize) -> f64 {
    let mut total = 0.0;
    for c in 0..k {
        let members: Vec<&[f64; 2]> = points.iter().zip(labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
        if members.is_empty() {
            continue;
        }
        let mx = members.iter().map(|p| p[0]).sum::<f64>() / members.len() as f64;
        let my = members.iter().map(|p| p[1]).sum::<f64>() / members.len() as f64;
        total += members.iter().map(|p| (p[0] - mx).powi(2) + (p[1] - my).powi(2)).sum::<f64>();
    }
    total
}

pub const BLOB_RADIUS: f64 = 1.0;

/// Three planar blobs of radius [`BLOB_RADIUS`] whose centres are pairwise
/// at least ten radii apart, with 6 to 12 points in total.
pub fn blob_instance(seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<[f64; 2]> = Vec::new();
    while centers.len() < 3 {
        let c = [rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0)];
        let far = centers.iter().all(|o: &[f64; 2]| ((c[0] - o[0]).powi(2) + (c[1] - o[1]).powi(2)).sqrt() >= 10.0 * BLOB_RADIUS);
        if far {
            centers.push(c);
        }
    }
    let n = rng.gen_range(6..=12);
    (0..n)
        .map(|i| {
            let c = centers[i % 3];
            let r = BLOB_RADIUS * rng.gen::<f64>().sqrt();
            let a = rng.gen_range(0.0..2.0 * PI);
            [c[0] + r * a.cos(), c[1] + r * a.sin()]
        })
        .collect()
}

pub fn kmeans_quality_check() -> Check {
    let mut optimal = 0;
    let mut monotone = 0;
    for seed in 0..100u64 {
        let pts = blob_instance(seed);
        let vecs: Vec<Vec<f64>> = pts.iter().map(|p| p.to_vec()).collect();
        let fit = kmeans(&vecs, 3, seed, Exec::Sequential).expect("kmeans");
        let opt = exhaustive_optimum(&pts, 3);
        let got = sse_of(&pts, &fit.assignments, 3);
        if (got - opt).abs() <= 1e-9 * opt.max(1.0) {
            optimal += 1;
        }
        if fit.objective_history.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs()) {
            monotone += 1;
        }
    }
    Check {
        name: "K-means quality",
        pass: optimal >= 95 && monotone == 100,
        detail: format!("{optimal}/100 at exhaustive optimum within 1e-9 (>=95); {monotone}/100 monotone objective (100)"),
    }
}

pub const SYSTEM_REFERENCE: &str = "You are a helpful assistant with expertise in recognizing patterns and identifying classes based on visual representations of audio data.";
pub const ZERO_SHOT_REFERENCE: &str = "Your task is to analyze a spectrogram, which is a visual representation of the frequency spectrum of sound over time, and determine the most likely sound class from a given list of possibilities. Analyze the spectrogram image, considering factors such as frequency patterns, intensity, and time variations. Focus solely on the patterns presented in the spectrogram. Do not let any assumptions about common sounds or environmental settings influence your decision. Here are the classes: ['dog', 'chainsaw', 'crackling_fire', 'helicopter', 'rain', 'crying_baby', 'clock_tick', 'sneezing', 'rooster', 'sea_waves']. Your response must always contain the exact name of the class only. For example, if you believe the spectrogram matches best with rain, your response would be rain. Here is the spectrogram:";
pub const FEW_SHOT_INTRO_REFERENCE: &str = "Your task is to analyze spectrograms, which are visual representations of the frequency spectrum of sound over time, and determine the most likely sound class for a given spectrogram.\nHere are examples of spectrograms for different sound classes:";
pub const FEW_SHOT_CLOSING_REFERENCE: &str = "\nNow, given a new spectrogram, analyze it considering factors such as frequency patterns, intensity, and time variations. Focus solely on the patterns presented in the spectrogram. Do not let any assumptions about common sounds or environmental settings influence your decision.\nYour task is to determine which of the example classes the new spectrogram most closely resembles. Your response must contain only the exact name of the class.\nHere is the new spectrogram to classify:";

pub fn tiny_image(tag: u8) -> RenderedSpectrogram {
    RenderedSpectrogram { image_bytes: vec![tag, 1, 2, 3], config_hash: "cfg".into(), clip_hash: None, width_px: 1, height_px: 1 }
}

pub fn esc10() -> Vec<String> {
    ESC10_CLASSES.iter().map(|s| s.to_string()).collect()
}

pub fn prompt_fidelity_check() -> Check {
    let classes = esc10();
    let mut failures = Vec::new();
    let zs = build_zero_shot_prompt(&tiny_image(200), &classes, ImageDetail::Auto).unwrap();
    if zs.system_text != SYSTEM_REFERENCE {
        failures.push("zero-shot system text".to_string());
    }
    if zs.parts.iter().filter_map(Part::as_text).collect::<String>() != ZERO_SHOT_REFERENCE || !zs.full_text().contains(ZERO_SHOT_REFERENCE) {
        failures.push("zero-shot user text".to_string());
    }
    if zs.image_count() != 1 {
        failures.push(format!("zero-shot has {} images", zs.image_count()));
    }
    let mut counts = Vec::new();
    for n in [1usize, 3, 10, 20] {
        let ex: Vec<(String, RenderedSpectrogram)> =
            (0..n).map(|i| (classes[i % classes.len()].clone(), tiny_image(i as u8))).collect();
        let p = build_few_shot_prompt(&ex, &tiny_image(250), &classes, ImageDetail::Auto).unwrap();
        let text = p.full_text();
        if p.system_text != SYSTEM_REFERENCE || !text.contains(FEW_SHOT_INTRO_REFERENCE) || !text.contains(FEW_SHOT_CLOSING_REFERENCE) {
            failures.push(format!("{n}-shot missing template sentence"));
        }
        for (c, _) in &ex {
            if !text.contains(&format!("Spectrogram for {c}:")) {
                failures.push(format!("{n}-shot missing caption for {c}"));
            }
        }
        let last_is_test = matches!(p.parts.last(), Some(Part::Image { .. }))
            && p.parts.last().and_then(Part::image_bytes).and_then(|r| r.ok()) == Some(tiny_image(250).image_bytes);
        if p.image_count() != n + 1 || !last_is_test {
            failures.push(format!("{n}-shot has {} images, test last: {last_is_test}", p.image_count()));
        }
        counts.push(format!("{n}->{}", p.image_count()));
    }
    Check {
        name: "Prompt fidelity",
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("zero-shot and few-shot templates verbatim; image counts {}", counts.join(", "))
        } else {
            failures.join("; ")
        },
    }
}

/// Expands a contingency table (rows = annotator a) into label pairs.
pub fn expand_table(table: &[&[usize]]) -> (Vec<String>, Vec<String>) {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, row) in table.iter().enumerate() {
        for (j, &n) in row.iter().enumerate() {
            for _ in 0..n {
                a.push(format!("c{i}"));
                b.push(format!("c{j}"));
            }
        }
    }
    (a, b)
}

/// Five tables with kappa worked out by hand from p_o and p_e.
pub fn kappa_tables() -> Vec<(Vec<Vec<usize>>, f64)> {
    vec![
        // p_o .60, marginals 60/40 and 50/50, p_e .50
        (vec![vec![35, 25], vec![15, 25]], 0.20),
        // p_o .70, marginals 25/25 and 30/20, p_e .50
        (vec![vec![20, 5], vec![10, 15]], 0.40),
        (vec![vec![10, 0, 0], vec![0, 10, 0], vec![0, 0, 10]], 1.0),
        // p_o 0, p_e .50
        (vec![vec![0, 10], vec![10, 0]], -1.0),
        // p_o 17/30, marginals 10/10/10 and 8/10/12, p_e 1/3
        (vec![vec![5, 2, 3], vec![1, 6, 3], vec![2, 2, 6]], 0.35),
    ]
}

pub fn metric_oracle_check() -> Check {
    let mut worst = 0.0f64;
    for (table, want) in kappa_tables() {
        let rows: Vec<&[usize]> = table.iter().map(Vec::as_slice).collect();
        let (a, b) = expand_table(&rows);
        let got = cohen_kappa_labels(&a, &b).unwrap();
        worst = worst.max((got - want).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let a: Vec<String> = (0..10_000).map(|_| format!("c{}", rng.gen_range(0..10))).collect();
    let b: Vec<String> = (0..10_000).map(|_| format!("c{}", rng.gen_range(0..10))).collect();
    let mc = cohen_kappa_labels(&a, &b).unwrap();

    let classes = esc10();
    let items: Vec<ClipMeta> = (0..200)
        .map(|i| ClipMeta {
            filename: format!("1-{i}-A-0.wav"),
            fold: 1,
            target: 0,
            category: classes[i % 10].clone(),
            esc10: true,
        })
        .collect();
    let annot = |src: &str, rng: &mut ChaCha8Rng| -> Vec<PredictionRecord> {
        items
            .iter()
            .map(|m| PredictionRecord::answered(m.clone(), classes[rng.gen_range(0..10)].clone(), src))
            .collect()
    };
    let ra = annot("a", &mut rng);
    let rb = annot("b", &mut rng);
    let mut ens_ok = true;
    for seed in 0..5 {
        let e = ensemble_majority(&[ra.clone(), ra.clone(), rb.clone()], seed).unwrap();
        ens_ok &= e.iter().zip(&ra).all(|(x, y)| x.predicted == y.predicted);
    }
    Check {
        name: "Metric oracles",
        pass: worst < 1e-12 && mc.abs() < 0.05 && ens_ok,
        detail: format!(
            "5 hand tables max |err| {worst:.1e} (<1e-12); Monte Carlo kappa {mc:+.4} (|k|<0.05); (a,a,b) ensemble == a: {ens_ok}"
        ),
    }
}
