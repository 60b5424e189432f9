//! ESC-layout manifests, audio decoding and fold partitions.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::resample::Resampler;

/// Default analysis rate.
pub const TARGET_RATE_HZ: u32 = 22_050;
/// Nominal ESC clip length; decoded clips are padded or truncated to it.
pub const CLIP_SECONDS: f64 = 5.0;
pub const FOLDS: [u8; 5] = [1, 2, 3, 4, 5];

/// The 50 ESC-50 categories, indexed by target id.
pub const ESC50_CATEGORIES: [&str; 50] = [
    "dog", "rooster", "pig", "cow", "frog", "cat", "hen", "insects", "sheep", "crow",
    "rain", "sea_waves", "crackling_fire", "crickets", "chirping_birds", "water_drops", "wind",
    "pouring_water", "toilet_flush", "thunderstorm", "crying_baby", "sneezing", "clapping",
    "breathing", "coughing", "footsteps", "laughing", "brushing_teeth", "snoring",
    "drinking_sipping", "door_wood_knock", "mouse_click", "keyboard_typing", "door_wood_creaks",
    "can_opening", "washing_machine", "vacuum_cleaner", "clock_alarm", "clock_tick",
    "glass_breaking", "helicopter", "chainsaw", "siren", "car_horn", "engine", "train",
    "church_bells", "airplane", "fireworks", "hand_saw",
];

/// ESC-10 classes in the order they first appear in the ESC-50 metadata table.
pub const ESC10_CLASSES: [&str; 10] = [
    "dog",
    "chainsaw",
    "crackling_fire",
    "helicopter",
    "rain",
    "crying_baby",
    "clock_tick",
    "sneezing",
    "rooster",
    "sea_waves",
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClipMeta {
    pub filename: String,
    pub fold: u8,
    pub target: u32,
    pub category: String,
    pub esc10: bool,
}

impl ClipMeta {
    /// File name without directory or extension.
    pub fn stem(&self) -> &str {
        let name = self.filename.rsplit('/').next().unwrap_or(&self.filename);
        name.rsplit_once('.').map_or(name, |(s, _)| s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
    pub source: ClipMeta,
}

impl AudioClip {
    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

const REQUIRED_COLUMNS: [&str; 5] = ["filename", "fold", "target", "category", "esc10"];

pub fn load_manifest(path: &Path) -> Result<Vec<ClipMeta>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(file)
}

/// Parses a header-bearing ESC-50 style metadata table. Extra columns are ignored.
pub fn parse_manifest<R: Read>(reader: R) -> Result<Vec<ClipMeta>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::RowParse { row: 0, message: e.to_string() })?
        .clone();
    let mut idx = [0usize; 5];
    for (slot, col) in idx.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| Error::ManifestSchema(col.to_string()))?;
    }
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        // header is line 1
        let row = i + 2;
        let rec = rec.map_err(|e| Error::RowParse { row, message: e.to_string() })?;
        let field = |k: usize| rec.get(idx[k]).unwrap_or("");
        let filename = field(0).to_string();
        let fold: u8 = field(1).parse().map_err(|_| Error::RowParse {
            row,
            message: format!("fold `{}` is not an integer", field(1)),
        })?;
        if !(1..=5).contains(&fold) {
            return Err(Error::RowParse { row, message: format!("fold {fold} outside 1..=5") });
        }
        let target: u32 = field(2).parse().map_err(|_| Error::RowParse {
            row,
            message: format!("target `{}` is not an integer", field(2)),
        })?;
        let category = field(3).to_string();
        if category.is_empty() {
            return Err(Error::RowParse { row, message: "empty category".into() });
        }
        let esc10 = parse_bool(field(4)).ok_or_else(|| Error::RowParse {
            row,
            message: format!("esc10 `{}` is not a boolean", field(4)),
        })?;
        if !seen.insert(filename.clone()) {
            return Err(Error::RowParse { row, message: format!("duplicate filename `{filename}`") });
        }
        rows.push(ClipMeta { filename, fold, target, category, esc10 });
    }
    Ok(rows)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" | "" => Some(false),
        _ => None,
    }
}

/// Writes a manifest in the ESC-50 column layout.
pub fn write_manifest(path: &Path, rows: &[ClipMeta]) -> Result<()> {
    let mut out = String::from("filename,fold,target,category,esc10,src_file,take\n");
    for r in rows {
        let (src, take) = esc_src_take(&r.filename);
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.filename,
            r.fold,
            r.target,
            r.category,
            if r.esc10 { "True" } else { "False" },
            src,
            take
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn esc_src_take(filename: &str) -> (String, String) {
    let parts: Vec<&str> = filename.trim_end_matches(".wav").split('-').collect();
    if parts.len() == 4 {
        (parts[1].to_string(), parts[2].to_string())
    } else {
        (String::new(), String::new())
    }
}

pub fn esc10_view(manifest: &[ClipMeta]) -> Vec<ClipMeta> {
    manifest.iter().filter(|m| m.esc10).cloned().collect()
}

/// Category names in order of first appearance.
pub fn class_list(manifest: &[ClipMeta]) -> Vec<String> {
    let mut seen = HashSet::new();
    manifest
        .iter()
        .filter(|m| seen.insert(m.category.as_str()))
        .map(|m| m.category.clone())
        .collect()
}

/// Checks the ESC-10 structure: 400 rows, 10 classes, 8 per class per fold.
pub fn validate_esc10(view: &[ClipMeta]) -> Result<()> {
    if view.len() != 400 {
        return Err(Error::Validation(format!("ESC-10 view has {} rows, expected 400", view.len())));
    }
    let classes = class_list(view);
    if classes.len() != 10 {
        return Err(Error::Validation(format!("ESC-10 view has {} classes", classes.len())));
    }
    let mut groups: BTreeMap<(u8, &str), usize> = BTreeMap::new();
    for m in view {
        *groups.entry((m.fold, m.category.as_str())).or_default() += 1;
    }
    for fold in FOLDS {
        for c in &classes {
            let n = groups.get(&(fold, c.as_str())).copied().unwrap_or(0);
            if n != 8 {
                return Err(Error::Validation(format!("fold {fold} class {c} has {n} rows, expected 8")));
            }
        }
    }
    Ok(())
}

/// Splits a manifest into the test fold and the exemplar pool (all other folds).
pub fn fold_split(manifest: &[ClipMeta], test_fold: u8) -> (Vec<ClipMeta>, Vec<ClipMeta>) {
    manifest.iter().cloned().partition(|m| m.fold == test_fold)
}

/// Draws the ESC-50 evaluation subset: two fold-1 clips per category.
pub fn esc50_subset(manifest: &[ClipMeta], seed: u64) -> Result<Vec<ClipMeta>> {
    let mut by_cat: BTreeMap<&str, Vec<&ClipMeta>> = BTreeMap::new();
    for m in manifest.iter().filter(|m| m.fold == 1) {
        by_cat.entry(m.category.as_str()).or_default().push(m);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = HashSet::new();
    for cat in ESC50_CATEGORIES {
        let pool = by_cat.get(cat).map(Vec::as_slice).unwrap_or(&[]);
        if pool.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "category {cat} has {} fold-1 clips, need 2",
                pool.len()
            )));
        }
        let mut pool: Vec<&ClipMeta> = pool.to_vec();
        pool.sort_by(|a, b| a.filename.cmp(&b.filename));
        for i in 0..2 {
            let j = rng.gen_range(i..pool.len());
            pool.swap(i, j);
            chosen.insert(pool[i].filename.clone());
        }
    }
    Ok(manifest.iter().filter(|m| chosen.contains(&m.filename)).cloned().collect())
}

/// Decodes a PCM WAV file into mono samples in [-1, 1] and its sample rate.
pub fn decode_wav(path: &Path) -> Result<(Vec<f64>, u32)> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "audio file not found"),
        ));
    }
    let decode_err = |e: hound::Error| Error::Decode { path: path.to_path_buf(), message: e.to_string() };
    let mut reader = hound::WavReader::open(path).map_err(decode_err)?;
    let spec = reader.spec();
    let channels = spec.channels.max(1) as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(decode_err)?,
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = (1u64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(decode_err)?
        }
        (fmt, bits) => {
            return Err(Error::Decode {
                path: path.to_path_buf(),
                message: format!("unsupported encoding {fmt:?} {bits}-bit"),
            })
        }
    };
    let mono = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    Ok((mono, spec.sample_rate))
}

/// Zero-pads or truncates to exactly `CLIP_SECONDS` at `rate_hz`.
pub fn fit_to_clip_length(mut samples: Vec<f64>, rate_hz: u32) -> Vec<f64> {
    let n = (CLIP_SECONDS * rate_hz as f64).round() as usize;
    samples.resize(n, 0.0);
    samples
}

pub fn load_audio(meta: &ClipMeta, root: &Path, target_rate_hz: u32) -> Result<AudioClip> {
    let path = root.join(&meta.filename);
    let (mono, rate) = decode_wav(&path)?;
    let resampled = if rate == target_rate_hz {
        mono
    } else {
        Resampler::new(rate, target_rate_hz).process(&mono)
    };
    Ok(AudioClip {
        samples: fit_to_clip_length(resampled, target_rate_hz),
        sample_rate_hz: target_rate_hz,
        source: meta.clone(),
    })
}

/// Loads clips in input order.
pub fn load_all(metas: &[ClipMeta], root: &Path, target_rate_hz: u32, exec: Exec) -> Result<Vec<AudioClip>> {
    exec.try_map(metas, |m| load_audio(m, root, target_rate_hz))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "filename,fold,target,category,esc10,src_file,take\n";

    #[test]
    fn header_only_is_empty() {
        assert!(parse_manifest(HEADER.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn missing_category_column_is_schema_error() {
        let text = "filename,fold,target,esc10\n1-1-A-0.wav,1,0,True\n";
        match parse_manifest(text.as_bytes()) {
            Err(Error::ManifestSchema(c)) => assert_eq!(c, "category"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_integer_fold_names_row() {
        let text = format!("{HEADER}1-1-A-0.wav,1,0,dog,True,1,A\n1-2-A-0.wav,x,0,dog,True,2,A\n");
        match parse_manifest(text.as_bytes()) {
            Err(Error::RowParse { row, .. }) => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn esc10_flags_are_coerced_and_order_kept() {
        let text = format!("{HEADER}b.wav,2,1,rooster,False,1,A\na.wav,1,0,dog,True,2,A\n");
        let rows = parse_manifest(text.as_bytes()).unwrap();
        assert_eq!(rows[0].filename, "b.wav");
        assert!(!rows[0].esc10);
        assert!(rows[1].esc10);
    }

    #[test]
    fn duplicate_filename_rejected() {
        let text = format!("{HEADER}a.wav,1,0,dog,True,1,A\na.wav,2,0,dog,True,1,A\n");
        assert!(matches!(parse_manifest(text.as_bytes()), Err(Error::RowParse { row: 3, .. })));
    }

    #[test]
    fn stem_strips_extension() {
        let m = ClipMeta {
            filename: "audio/1-100032-A-0.wav".into(),
            fold: 1,
            target: 0,
            category: "dog".into(),
            esc10: true,
        };
        assert_eq!(m.stem(), "1-100032-A-0");
    }

    #[test]
    fn fit_pads_and_truncates() {
        assert_eq!(fit_to_clip_length(vec![1.0; 10], 100).len(), 500);
        assert_eq!(fit_to_clip_length(vec![1.0; 600], 100).len(), 500);
    }
}
