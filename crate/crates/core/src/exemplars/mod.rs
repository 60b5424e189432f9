//! Few-shot exemplar selection from the folds outside the test fold.

mod kmeans;

pub use kmeans::{kmeans, squared_distance, KMeansFit, MAX_ITERATIONS};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{AudioClip, ClipMeta};
use crate::dsp::{stft_magnitude, to_db, AmpScale, SpectrogramConfig, Style, TOP_DB};
use crate::error::{Error, Result};
use crate::par::Exec;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Random,
    Kmeans,
    Handpicked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Mel,
    Amp,
    None,
}

impl FromStr for Feature {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mel" => Ok(Feature::Mel),
            "amp" => Ok(Feature::Amp),
            "none" => Ok(Feature::None),
            o => Err(Error::Config(format!("unknown feature `{o}`"))),
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Feature::Mel => "mel",
            Feature::Amp => "amp",
            Feature::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassExemplars {
    pub category: String,
    pub clips: Vec<ClipMeta>,
}

/// Per-class exemplar assignment, listed in class order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExemplarSet {
    pub per_class: Vec<ClassExemplars>,
    pub method: Method,
    pub feature: Feature,
    pub k: usize,
    pub per_class_count: usize,
    pub excluded_fold: u8,
    pub seed: u64,
}

impl ExemplarSet {
    /// Exemplars in prompt order: class by class, each class's clips in order.
    pub fn ordered(&self) -> Vec<(&str, &ClipMeta)> {
        self.per_class
            .iter()
            .flat_map(|c| c.clips.iter().map(move |m| (c.category.as_str(), m)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.per_class.iter().map(|c| c.clips.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks fold exclusion and per-class completeness against `classes`.
    pub fn validate(&self, classes: &[String]) -> Result<()> {
        for c in &self.per_class {
            for m in &c.clips {
                if m.fold == self.excluded_fold {
                    return Err(Error::Validation(format!(
                        "exemplar {} is in excluded fold {}",
                        m.filename, self.excluded_fold
                    )));
                }
                if m.category != c.category {
                    return Err(Error::Validation(format!(
                        "exemplar {} is {} but listed under {}",
                        m.filename, m.category, c.category
                    )));
                }
            }
        }
        let listed: Vec<&str> = self.per_class.iter().map(|c| c.category.as_str()).collect();
        for class in classes {
            match self.per_class.iter().find(|c| &c.category == class) {
                None => return Err(Error::Validation(format!("no exemplars listed for class {class}"))),
                Some(c) if c.clips.len() != self.per_class_count => {
                    return Err(Error::Validation(format!(
                        "class {class} has {} exemplars, expected {}",
                        c.clips.len(),
                        self.per_class_count
                    )))
                }
                _ => {}
            }
        }
        if let Some(extra) = listed.iter().find(|c| !classes.iter().any(|k| k == *c)) {
            return Err(Error::Validation(format!("exemplar class {extra} is not a task class")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub clip: ClipMeta,
    pub values: Vec<f64>,
}

/// Flattened dB spectrogram (row-major) used as a clustering feature.
pub fn featurize(clip: &AudioClip, feature: Feature) -> Result<FeatureVector> {
    let values = match feature {
        Feature::Mel => {
            let cfg = SpectrogramConfig { style: Style::Mel, amp_scale: AmpScale::LogDb, ..Default::default() };
            crate::dsp::mel_spectrogram(clip, &cfg)?.values
        }
        Feature::Amp => to_db(&stft_magnitude(clip, &SpectrogramConfig::default())?, TOP_DB)?.values,
        Feature::None => return Err(Error::Config("featurize needs mel or amp".into())),
    };
    Ok(FeatureVector { clip: clip.source.clone(), values })
}

pub fn featurize_all(clips: &[AudioClip], feature: Feature, exec: Exec) -> Result<Vec<FeatureVector>> {
    exec.try_map(clips, |c| featurize(c, feature))
}

fn check_pool(pool: &[ClipMeta], excluded_fold: u8) -> Result<()> {
    match pool.iter().find(|m| m.fold == excluded_fold) {
        Some(m) => Err(Error::Validation(format!(
            "pool clip {} belongs to test fold {excluded_fold}",
            m.filename
        ))),
        None => Ok(()),
    }
}

/// Per class: cluster with K-means, order clusters by size (descending, ties
/// by ascending centroid norm), and take the clip nearest each of the first
/// `per_class_count` centroids (ties by ascending filename). A selected
/// cluster that ended up empty contributes the unused clip nearest its centroid.
#[allow(clippy::too_many_arguments)]
pub fn select_kmeans(
    features: &[FeatureVector],
    classes: &[String],
    per_class_count: usize,
    k: usize,
    feature: Feature,
    excluded_fold: u8,
    seed: u64,
    exec: Exec,
) -> Result<ExemplarSet> {
    if per_class_count > k {
        return Err(Error::Config(format!("per_class_count {per_class_count} exceeds k = {k}")));
    }
    let metas: Vec<ClipMeta> = features.iter().map(|f| f.clip.clone()).collect();
    check_pool(&metas, excluded_fold)?;
    let per_class = exec.try_map(classes, |class| {
        let mut members: Vec<&FeatureVector> = features.iter().filter(|f| &f.clip.category == class).collect();
        members.sort_by(|a, b| a.clip.filename.cmp(&b.clip.filename));
        if members.len() < k {
            return Err(Error::InsufficientData(format!(
                "class {class} has {} pool clips, need at least k = {k}",
                members.len()
            )));
        }
        let points: Vec<Vec<f64>> = members.iter().map(|m| m.values.clone()).collect();
        let fit = kmeans(&points, k, seed, Exec::Sequential)?;
        let sizes = fit.cluster_sizes();
        let norms: Vec<f64> = fit.centroids.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>()).collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(norms[a].total_cmp(&norms[b])).then(a.cmp(&b)));
        let mut taken: Vec<usize> = Vec::new();
        for &cluster in order.iter().take(per_class_count) {
            let in_cluster = |i: &usize| fit.assignments[*i] == cluster;
            let candidates: Vec<usize> = if sizes[cluster] > 0 {
                (0..members.len()).filter(in_cluster).collect()
            } else {
                (0..members.len()).filter(|i| !taken.contains(i)).collect()
            };
            let best = candidates
                .into_iter()
                .filter(|i| !taken.contains(i))
                .min_by(|&a, &b| {
                    squared_distance(&points[a], &fit.centroids[cluster])
                        .total_cmp(&squared_distance(&points[b], &fit.centroids[cluster]))
                        .then(members[a].clip.filename.cmp(&members[b].clip.filename))
                })
                .ok_or_else(|| Error::InsufficientData(format!("class {class} ran out of exemplar candidates")))?;
            taken.push(best);
        }
        Ok(ClassExemplars { category: class.clone(), clips: taken.iter().map(|&i| members[i].clip.clone()).collect() })
    })?;
    Ok(ExemplarSet { per_class, method: Method::Kmeans, feature, k, per_class_count, excluded_fold, seed })
}

/// Seeded uniform draw without replacement per class.
pub fn select_random(
    pool: &[ClipMeta],
    classes: &[String],
    per_class_count: usize,
    excluded_fold: u8,
    seed: u64,
) -> Result<ExemplarSet> {
    check_pool(pool, excluded_fold)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_class = Vec::with_capacity(classes.len());
    for class in classes {
        let mut members: Vec<&ClipMeta> = pool.iter().filter(|m| &m.category == class).collect();
        if members.len() < per_class_count || members.is_empty() {
            return Err(Error::InsufficientData(format!(
                "class {class} has {} pool clips, need {per_class_count}",
                members.len()
            )));
        }
        members.sort_by(|a, b| a.filename.cmp(&b.filename));
        for i in 0..per_class_count {
            let j = rng.gen_range(i..members.len());
            members.swap(i, j);
        }
        per_class.push(ClassExemplars {
            category: class.clone(),
            clips: members[..per_class_count].iter().map(|m| (*m).clone()).collect(),
        });
    }
    Ok(ExemplarSet {
        per_class,
        method: Method::Random,
        feature: Feature::None,
        k: 0,
        per_class_count,
        excluded_fold,
        seed,
    })
}

/// Parses `category: file[, file...]` lines; blank lines and `#` comments are skipped.
pub fn parse_handpicked(text: &str) -> Result<Vec<(String, Vec<String>)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (cat, files) = line
            .split_once(':')
            .ok_or_else(|| Error::Validation(format!("line {}: expected `category: filename`", i + 1)))?;
        let files: Vec<String> = files.split(',').map(|f| f.trim().to_string()).filter(|f| !f.is_empty()).collect();
        if files.is_empty() {
            return Err(Error::Validation(format!("line {}: no filenames for {}", i + 1, cat.trim())));
        }
        out.push((cat.trim().to_string(), files));
    }
    Ok(out)
}

/// Validates a hand-picked listing against the manifest and the test fold.
pub fn select_handpicked(
    listing: &[(String, Vec<String>)],
    manifest: &[ClipMeta],
    classes: &[String],
    test_fold: u8,
) -> Result<ExemplarSet> {
    let by_name: HashMap<&str, &ClipMeta> = manifest.iter().map(|m| (m.filename.as_str(), m)).collect();
    let mut grouped: BTreeMap<&str, Vec<ClipMeta>> = BTreeMap::new();
    for (cat, files) in listing {
        for f in files {
            let meta = by_name
                .get(f.as_str())
                .ok_or_else(|| Error::Validation(format!("unknown exemplar file {f}")))?;
            if meta.fold == test_fold {
                return Err(Error::Validation(format!("exemplar {f} is in test fold {test_fold}")));
            }
            if &meta.category != cat {
                return Err(Error::Validation(format!("exemplar {f} is {} but listed as {cat}", meta.category)));
            }
            grouped.entry(cat.as_str()).or_default().push((*meta).clone());
        }
    }
    let count = grouped.values().next().map_or(0, Vec::len);
    let per_class = classes
        .iter()
        .map(|c| {
            grouped
                .remove(c.as_str())
                .map(|clips| ClassExemplars { category: c.clone(), clips })
                .ok_or_else(|| Error::Validation(format!("hand-picked listing has no entry for class {c}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(extra) = grouped.keys().next() {
        return Err(Error::Validation(format!("hand-picked class {extra} is not a task class")));
    }
    let set = ExemplarSet {
        per_class,
        method: Method::Handpicked,
        feature: Feature::None,
        k: 0,
        per_class_count: count,
        excluded_fold: test_fold,
        seed: 0,
    };
    set.validate(classes)?;
    Ok(set)
}
