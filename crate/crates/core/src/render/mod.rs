//! Deterministic spectrogram rasterisation.
//!
//! Layout: the plot rectangle is always `(W - LEFT - RIGHT) x (H - TOP - BOTTOM)`
//! where `W x H` is the configured image size (halved for low detail). With
//! labels shown the plot sits inside a `W x H` canvas with axis margins; with
//! labels hidden the canvas is the bare plot. A colorbar, when shown, extends
//! the canvas to the right by [`Layout::COLORBAR_EXTENT`]. The plot pixels are
//! therefore identical across label/colorbar variants.

mod canvas;
mod colormap;
#[rustfmt::skip]
mod colormap_data;

pub use canvas::{decode_png, Canvas, INK, WHITE};
pub use colormap::{colormap_lookup, lookup, table};

use serde::{Deserialize, Serialize};

use crate::dataset::AudioClip;
use crate::dsp::{
    spectrogram, AmpScale, ColormapName, Detail, DspDecisions, FreqAxis, SpectrogramConfig,
    SpectrogramMatrix, Style, Unit, DSP_DECISIONS,
};
use crate::error::{Error, Result};
use crate::hash::{sha256_hex, short_hash};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Layout {
    pub left: usize,
    pub right: usize,
    pub top: usize,
    pub bottom: usize,
    pub colorbar_gap: usize,
    pub colorbar_width: usize,
    pub colorbar_text: usize,
}

impl Layout {
    pub const STANDARD: Layout = Layout {
        left: 64,
        right: 16,
        top: 12,
        bottom: 40,
        colorbar_gap: 10,
        colorbar_width: 16,
        colorbar_text: 60,
    };
    pub const COLORBAR_EXTENT: usize = 10 + 16 + 60;
}

/// Revision of the rasteriser; bump when pixel output changes.
pub const RENDERER_VERSION: u32 = 1;

/// Pixel geometry derived from a config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frame {
    pub canvas_w: usize,
    pub canvas_h: usize,
    pub plot_x: usize,
    pub plot_y: usize,
    pub plot_w: usize,
    pub plot_h: usize,
    pub colorbar_x: Option<usize>,
}

pub fn frame_for(cfg: &SpectrogramConfig) -> Frame {
    let l = Layout::STANDARD;
    let (w, h) = base_size(cfg);
    let plot_w = w - l.left - l.right;
    let plot_h = h - l.top - l.bottom;
    let (mut canvas_w, canvas_h, plot_x, plot_y) = if cfg.show_labels {
        (w, h, l.left, l.top)
    } else {
        (plot_w, plot_h, 0, 0)
    };
    let colorbar_x = cfg.show_colorbar.then(|| {
        let x = canvas_w + l.colorbar_gap;
        canvas_w += Layout::COLORBAR_EXTENT;
        x
    });
    Frame { canvas_w, canvas_h, plot_x, plot_y, plot_w, plot_h, colorbar_x }
}

fn base_size(cfg: &SpectrogramConfig) -> (usize, usize) {
    let (w, h) = (cfg.image_width_px as usize, cfg.image_height_px as usize);
    match cfg.detail {
        Detail::Standard => (w, h),
        Detail::Low => (w / 2, h / 2),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedSpectrogram {
    pub image_bytes: Vec<u8>,
    /// Hash of (config, dsp decisions, layout); names the corpus directory.
    pub config_hash: String,
    /// Hash of (config hash, clip identity) when rendered from a clip.
    pub clip_hash: Option<String>,
    pub width_px: u32,
    pub height_px: u32,
}

impl RenderedSpectrogram {
    pub fn image_sha256(&self) -> String {
        sha256_hex(&self.image_bytes)
    }
}

#[derive(Serialize)]
struct HashInput<'a> {
    config: &'a SpectrogramConfig,
    decisions: &'a DspDecisions,
    layout: Layout,
    renderer_version: u32,
}

pub fn config_hash(cfg: &SpectrogramConfig) -> String {
    short_hash(&HashInput {
        config: cfg,
        decisions: &DSP_DECISIONS,
        layout: Layout::STANDARD,
        renderer_version: RENDERER_VERSION,
    })
}

pub fn clip_hash(config_hash: &str, filename: &str) -> String {
    short_hash(&(config_hash, filename))
}

/// Sidecar document written next to each rendered image.
#[derive(Debug, Clone, Serialize)]
pub struct RenderSidecar<'a> {
    pub config: &'a SpectrogramConfig,
    pub config_hash: &'a str,
    pub clip_hash: Option<&'a str>,
    pub filename: Option<&'a str>,
    pub decisions: &'a DspDecisions,
    pub width_px: u32,
    pub height_px: u32,
    pub image_sha256: String,
}

/// Row index (0 = bottom) to matrix bin.
fn row_bins(m: &SpectrogramMatrix, cfg: &SpectrogramConfig, plot_h: usize) -> Vec<usize> {
    let n = m.n_bins;
    let log_axis = cfg.freq_axis == FreqAxis::Log && cfg.style == Style::Amplitude && n >= 3 && plot_h > 1;
    (0..plot_h)
        .map(|r| {
            if log_axis {
                // bins 1..n-1 spaced logarithmically
                let t = r as f64 / (plot_h - 1) as f64;
                let b = ((n - 1) as f64).powf(t).round() as usize;
                b.clamp(1, n - 1)
            } else {
                (r * n / plot_h).min(n - 1)
            }
        })
        .collect()
}

fn normalise(m: &SpectrogramMatrix) -> (Vec<f64>, f64, f64) {
    let (lo, hi) = m.min_max();
    let span = hi - lo;
    let values = if span > 0.0 {
        m.values.iter().map(|v| (v - lo) / span).collect()
    } else {
        vec![0.0; m.values.len()]
    };
    (values, lo, hi)
}

pub fn render(m: &SpectrogramMatrix, cfg: &SpectrogramConfig) -> Result<RenderedSpectrogram> {
    cfg.validate()?;
    if m.is_empty() {
        return Err(Error::EmptyInput("cannot render an empty matrix".into()));
    }
    let canvas = rasterize(m, cfg)?;
    let image_bytes = canvas.encode_png()?;
    Ok(RenderedSpectrogram {
        image_bytes,
        config_hash: config_hash(cfg),
        clip_hash: None,
        width_px: canvas.width as u32,
        height_px: canvas.height as u32,
    })
}

/// Computes the clip's spectrogram for `cfg` and renders it.
pub fn render_clip(clip: &AudioClip, cfg: &SpectrogramConfig) -> Result<RenderedSpectrogram> {
    let m = spectrogram(clip, cfg)?;
    let mut r = render(&m, cfg)?;
    r.clip_hash = Some(clip_hash(&r.config_hash, &clip.source.filename));
    Ok(r)
}

/// Produces the raw raster without PNG encoding.
pub fn rasterize(m: &SpectrogramMatrix, cfg: &SpectrogramConfig) -> Result<Canvas> {
    if m.is_empty() {
        return Err(Error::EmptyInput("cannot render an empty matrix".into()));
    }
    let f = frame_for(cfg);
    let mut canvas = Canvas::new(f.canvas_w, f.canvas_h, WHITE);
    let (norm, lo, hi) = normalise(m);
    let rows = row_bins(m, cfg, f.plot_h);
    let cols: Vec<usize> = (0..f.plot_w).map(|x| (x * m.n_frames / f.plot_w).min(m.n_frames - 1)).collect();
    for y in 0..f.plot_h {
        let bin = rows[f.plot_h - 1 - y];
        let row = &norm[bin * m.n_frames..(bin + 1) * m.n_frames];
        for (x, &t) in cols.iter().enumerate() {
            canvas.put(f.plot_x + x, f.plot_y + y, lookup(row[t], cfg.colormap));
        }
    }
    if cfg.show_labels {
        draw_axes(&mut canvas, &f, m, cfg);
    }
    if let Some(cx) = f.colorbar_x {
        draw_colorbar(&mut canvas, &f, cx, lo, hi, cfg);
    }
    Ok(canvas)
}

fn tick_text(v: f64, span: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    if span >= 10.0 {
        format!("{v:.0}")
    } else if span >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

fn hz_label(hz: f64) -> String {
    if hz >= 1000.0 {
        format!("{}k", (hz / 1000.0).round() as u64)
    } else {
        format!("{}", hz.round() as u64)
    }
}

/// Vertical tick positions as (row from bottom, label).
fn y_ticks(m: &SpectrogramMatrix, cfg: &SpectrogramConfig, plot_h: usize) -> (Vec<(usize, String)>, &'static str) {
    let n = m.n_bins;
    let per_row = |idx: f64| ((idx * plot_h as f64 / n as f64).round() as usize).min(plot_h - 1);
    match cfg.style {
        Style::Mfcc => {
            let ticks = (0..n).step_by(5).map(|k| (per_row(k as f64), k.to_string())).collect();
            (ticks, "MFCC")
        }
        Style::Mel => {
            let ticks = [64.0, 128.0, 256.0, 512.0, 1024.0, 2048.0, 4096.0, 8192.0]
                .iter()
                .filter(|&&hz| hz <= m.bin_frequencies_hz[n - 1] && hz >= m.bin_frequencies_hz[0])
                .map(|&hz| {
                    let idx = (0..n)
                        .min_by(|&a, &b| {
                            (m.bin_frequencies_hz[a] - hz).abs().total_cmp(&(m.bin_frequencies_hz[b] - hz).abs())
                        })
                        .unwrap_or(0);
                    (per_row(idx as f64), hz_label(hz))
                })
                .collect();
            (ticks, "Hz")
        }
        Style::Amplitude => {
            let bin_hz = if n > 1 { m.bin_frequencies_hz[1] - m.bin_frequencies_hz[0] } else { 1.0 };
            let top = m.bin_frequencies_hz[n - 1];
            let ticks = if cfg.freq_axis == FreqAxis::Log && n >= 3 && plot_h > 1 {
                let span = ((n - 1) as f64).ln();
                [32.0, 64.0, 128.0, 256.0, 512.0, 1024.0, 2048.0, 4096.0, 8192.0]
                    .iter()
                    .filter(|&&hz| hz >= bin_hz && hz <= top)
                    .map(|&hz| {
                        let r = ((hz / bin_hz).ln() / span * (plot_h - 1) as f64).round() as usize;
                        (r.min(plot_h - 1), hz_label(hz))
                    })
                    .collect()
            } else {
                (0..)
                    .map(|i| i as f64 * 2000.0)
                    .take_while(|&hz| hz <= top)
                    .map(|hz| (per_row(hz / bin_hz), hz_label(hz)))
                    .collect()
            };
            (ticks, "Hz")
        }
    }
}

fn draw_axes(canvas: &mut Canvas, f: &Frame, m: &SpectrogramMatrix, cfg: &SpectrogramConfig) {
    let (x0, y0, w, h) = (f.plot_x, f.plot_y, f.plot_w, f.plot_h);
    let bottom = y0 + h;
    // axis lines sit just outside the plot rectangle
    canvas.vline(x0 - 1, y0, bottom, INK);
    canvas.hline(x0 - 1, x0 + w - 1, bottom, INK);

    // time ticks at whole seconds
    let dt = if m.frame_times_s.len() > 1 { m.frame_times_s[1] - m.frame_times_s[0] } else { 0.0 };
    let t_end = m.frame_times_s.last().copied().unwrap_or(0.0);
    if dt > 0.0 {
        let mut s = 0u32;
        while s as f64 <= t_end {
            let frame = s as f64 / dt;
            let x = x0 + ((frame * w as f64 / m.n_frames as f64).round() as usize).min(w - 1);
            canvas.vline(x, bottom + 1, bottom + 4, INK);
            let label = s.to_string();
            let tw = Canvas::text_width(&label);
            canvas.text(x.saturating_sub(tw / 2), bottom + 6, &label, INK);
            s += 1;
        }
    }
    let title = "Time (s)";
    canvas.text(x0 + w / 2 - Canvas::text_width(title) / 2, bottom + 18, title, INK);

    let (ticks, unit) = y_ticks(m, cfg, h);
    for (r, label) in ticks {
        let y = y0 + h - 1 - r;
        canvas.hline(x0 - 5, x0 - 2, y, INK);
        let tw = Canvas::text_width(&label);
        canvas.text((x0 - 7).saturating_sub(tw), y.saturating_sub(3), &label, INK);
    }
    let uh = Canvas::text_width(unit);
    canvas.text_vertical(2, y0 + h / 2 - uh / 2, unit, INK);
}

fn draw_colorbar(canvas: &mut Canvas, f: &Frame, cx: usize, lo: f64, hi: f64, cfg: &SpectrogramConfig) {
    let l = Layout::STANDARD;
    let (y0, h) = (f.plot_y, f.plot_h);
    for r in 0..h {
        let v = if h > 1 { r as f64 / (h - 1) as f64 } else { 0.0 };
        let rgb = lookup(v, cfg.colormap);
        let y = y0 + h - 1 - r;
        for x in cx..cx + l.colorbar_width {
            canvas.put(x, y, rgb);
        }
    }
    let right = cx + l.colorbar_width;
    canvas.vline(cx - 1, y0, y0 + h - 1, INK);
    canvas.vline(right, y0, y0 + h - 1, INK);
    canvas.hline(cx - 1, right, y0.saturating_sub(1), INK);
    canvas.hline(cx - 1, right, y0 + h, INK);
    let span = hi - lo;
    let unit = match cfg.amp_scale {
        AmpScale::LogDb if cfg.style != Style::Mfcc => " dB",
        _ => "",
    };
    for (frac, v) in [(0.0, lo), (0.5, lo + span / 2.0), (1.0, hi)] {
        let y = y0 + h - 1 - ((h - 1) as f64 * frac).round() as usize;
        canvas.hline(right + 1, right + 3, y, INK);
        let label = format!("{}{unit}", tick_text(v, span));
        let text_y = y.saturating_sub(3).min(canvas.height.saturating_sub(8));
        canvas.text(right + 5, text_y, &label, INK);
    }
}

/// Named configuration variant in the hyperparameter ablation grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationVariant {
    pub label: String,
    pub slug: String,
    pub config: SpectrogramConfig,
}

/// The nine ablation configurations, the first being `base` itself.
pub fn ablation_grid(base: &SpectrogramConfig) -> Vec<AblationVariant> {
    let with = |f: &dyn Fn(&mut SpectrogramConfig)| {
        let mut c = base.clone();
        f(&mut c);
        c
    };
    let entries: Vec<(&str, &str, SpectrogramConfig)> = vec![
        ("Default parameters", "default", base.clone()),
        ("Linear frequency axis", "linear_frequency_axis", with(&|c| c.freq_axis = FreqAxis::Linear)),
        ("Linear amplitude scale", "linear_amplitude_scale", with(&|c| c.amp_scale = AmpScale::Linear)),
        ("Remove labels", "remove_labels", with(&|c| c.show_labels = false)),
        ("Show colorbar", "show_colorbar", with(&|c| c.show_colorbar = true)),
        ("Magma colormap", "magma_colormap", with(&|c| c.colormap = ColormapName::Magma)),
        ("Mel spectrogram", "mel_spectrogram", with(&|c| c.style = Style::Mel)),
        ("MFCCs", "mfccs", with(&|c| c.style = Style::Mfcc)),
        ("Low resolution", "low_resolution", with(&|c| c.detail = Detail::Low)),
    ];
    entries
        .into_iter()
        .map(|(label, slug, config)| AblationVariant { label: label.into(), slug: slug.into(), config })
        .collect()
}

/// Heatmap of a square count matrix, each cell `cell_px` wide, normalised by
/// the largest count.
pub fn render_heatmap(counts: &[Vec<u64>], cell_px: usize, colormap: ColormapName) -> Result<Vec<u8>> {
    let n = counts.len();
    if n == 0 || counts.iter().any(|r| r.len() != n) {
        return Err(Error::Validation("heatmap needs a non-empty square matrix".into()));
    }
    let max = counts.iter().flatten().copied().max().unwrap_or(0);
    let mut canvas = Canvas::new(n * cell_px, n * cell_px, WHITE);
    for (r, row) in counts.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let t = if max > 0 { v as f64 / max as f64 } else { 0.0 };
            canvas.fill_rect(c * cell_px, r * cell_px, cell_px, cell_px, lookup(t, colormap));
        }
    }
    canvas.encode_png()
}

/// Unit-aware label for report documents.
pub fn unit_name(u: Unit) -> &'static str {
    match u {
        Unit::LinearMagnitude => "linear_magnitude",
        Unit::Db => "db",
        Unit::MelPower => "mel_power",
        Unit::MelPowerDb => "mel_power_db",
        Unit::MfccCoeff => "mfcc_coeff",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(bins: usize, frames: usize) -> SpectrogramMatrix {
        let values = (0..bins * frames).map(|i| ((i * 31) % 97) as f64 - 80.0).collect();
        SpectrogramMatrix::new(
            values,
            bins,
            frames,
            (0..bins).map(|b| b as f64 * 22050.0 / ((bins - 1) * 2) as f64).collect(),
            (0..frames).map(|t| t as f64 * 512.0 / 22050.0).collect(),
            Unit::Db,
        )
        .unwrap()
    }

    #[test]
    fn constant_matrix_renders_colormap_zero() {
        let m = SpectrogramMatrix::new(vec![3.0; 20], 4, 5, vec![0.0, 1.0, 2.0, 3.0], vec![0.0; 5], Unit::Db).unwrap();
        let cfg = SpectrogramConfig { show_labels: false, ..Default::default() };
        let c = rasterize(&m, &cfg).unwrap();
        let zero = lookup(0.0, ColormapName::Viridis);
        assert!(c.data.chunks_exact(3).all(|p| p == zero));
    }

    #[test]
    fn default_frame_is_base_size() {
        let f = frame_for(&SpectrogramConfig::default());
        assert_eq!((f.canvas_w, f.canvas_h), (640, 480));
        assert_eq!((f.plot_w, f.plot_h), (560, 428));
        let low = frame_for(&SpectrogramConfig { detail: Detail::Low, ..Default::default() });
        assert_eq!((low.canvas_w, low.canvas_h), (320, 240));
    }

    #[test]
    fn rendering_is_deterministic() {
        let m = ramp(33, 20);
        let cfg = SpectrogramConfig::default();
        assert_eq!(render(&m, &cfg).unwrap(), render(&m, &cfg).unwrap());
    }

    #[test]
    fn config_hash_tracks_every_field() {
        let base = SpectrogramConfig::default();
        let grid = ablation_grid(&base);
        let hashes: std::collections::HashSet<String> = grid.iter().map(|v| config_hash(&v.config)).collect();
        assert_eq!(hashes.len(), 9);
        let hop = SpectrogramConfig { hop: 256, ..base.clone() };
        assert_ne!(config_hash(&hop), config_hash(&base));
    }

    #[test]
    fn ablation_grid_shape() {
        let base = SpectrogramConfig::default();
        let grid = ablation_grid(&base);
        assert_eq!(grid.len(), 9);
        assert_eq!(grid[0].config, base);
        assert_eq!(grid[0].label, "Default parameters");
        let low = grid.iter().find(|v| v.slug == "low_resolution").unwrap();
        let f = frame_for(&low.config);
        assert_eq!((f.canvas_w * 2, f.canvas_h * 2), (640, 480));
    }

    #[test]
    fn log_axis_starts_at_first_nonzero_bin() {
        let m = ramp(1025, 4);
        let rows = row_bins(&m, &SpectrogramConfig::default(), 428);
        assert_eq!(rows[0], 1);
        assert_eq!(*rows.last().unwrap(), 1024);
        assert!(rows.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn heatmap_identity_diagonal_at_max() {
        let counts: Vec<Vec<u64>> = (0..3).map(|r| (0..3).map(|c| u64::from(r == c) * 8).collect()).collect();
        let png = render_heatmap(&counts, 10, ColormapName::Viridis).unwrap();
        let c = decode_png(&png).unwrap();
        assert_eq!(c.pixel(15, 15), lookup(1.0, ColormapName::Viridis));
        assert_eq!(c.pixel(15, 5), lookup(0.0, ColormapName::Viridis));
    }
}
