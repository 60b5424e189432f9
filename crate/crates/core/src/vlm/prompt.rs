//! Zero-shot and few-shot prompt templates.

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::RenderedSpectrogram;

pub const PROMPT_TEMPLATE_VERSION: &str = "vsc-prompts-1";

pub const SYSTEM_TEXT: &str = "You are a helpful assistant with expertise in recognizing patterns and identifying classes based on visual representations of audio data.";

const ZERO_SHOT_HEAD: &str = "Your task is to analyze a spectrogram, which is a visual representation of the frequency spectrum of sound over time, and determine the most likely sound class from a given list of possibilities. Analyze the spectrogram image, considering factors such as frequency patterns, intensity, and time variations. Focus solely on the patterns presented in the spectrogram. Do not let any assumptions about common sounds or environmental settings influence your decision. Here are the classes: ";

const ZERO_SHOT_TAIL: &str = ". Your response must always contain the exact name of the class only. For example, if you believe the spectrogram matches best with rain, your response would be rain. Here is the spectrogram:";

pub const FEW_SHOT_INTRO: &str = "Your task is to analyze spectrograms, which are visual representations of the frequency spectrum of sound over time, and determine the most likely sound class for a given spectrogram.\nHere are examples of spectrograms for different sound classes:";

pub const FEW_SHOT_CLOSING: &str = "\nNow, given a new spectrogram, analyze it considering factors such as frequency patterns, intensity, and time variations. Focus solely on the patterns presented in the spectrogram. Do not let any assumptions about common sounds or environmental settings influence your decision.\nYour task is to determine which of the example classes the new spectrogram most closely resembles. Your response must contain only the exact name of the class.\nHere is the new spectrogram to classify:";

pub const PNG_MEDIA_TYPE: &str = "image/png";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageDetail {
    Auto,
    Low,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Part {
    Text {
        text: String,
    },
    Image {
        media_type: String,
        /// Base64 (standard alphabet, padded) image bytes.
        data: String,
        detail: ImageDetail,
    },
}

impl Part {
    pub fn image(r: &RenderedSpectrogram, detail: ImageDetail) -> Self {
        Part::Image {
            media_type: PNG_MEDIA_TYPE.into(),
            data: base64::engine::general_purpose::STANDARD.encode(&r.image_bytes),
            detail,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Part::Text { text } => Some(text),
            Part::Image { .. } => None,
        }
    }

    pub fn image_bytes(&self) -> Option<Result<Vec<u8>>> {
        match self {
            Part::Image { data, .. } => Some(
                base64::engine::general_purpose::STANDARD
                    .decode(data)
                    .map_err(|e| Error::Image(format!("bad base64 payload: {e}"))),
            ),
            Part::Text { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub system_text: String,
    pub parts: Vec<Part>,
    pub class_list: Vec<String>,
    pub shot_count: usize,
}

impl Prompt {
    pub fn image_count(&self) -> usize {
        self.parts.iter().filter(|p| matches!(p, Part::Image { .. })).count()
    }

    pub fn text_count(&self) -> usize {
        self.parts.len() - self.image_count()
    }

    /// All text content joined with newlines, system text first.
    pub fn full_text(&self) -> String {
        std::iter::once(self.system_text.as_str())
            .chain(self.parts.iter().filter_map(Part::as_text))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("prompt serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Python-style list literal: `['dog', 'rain']`.
pub fn class_list_literal(classes: &[String]) -> String {
    let inner: Vec<String> = classes.iter().map(|c| format!("'{c}'")).collect();
    format!("[{}]", inner.join(", "))
}

pub fn zero_shot_text(classes: &[String]) -> String {
    format!("{ZERO_SHOT_HEAD}{}{ZERO_SHOT_TAIL}", class_list_literal(classes))
}

pub fn build_zero_shot_prompt(test_image: &RenderedSpectrogram, classes: &[String], detail: ImageDetail) -> Result<Prompt> {
    if classes.is_empty() {
        return Err(Error::Config("zero-shot prompt needs at least one class".into()));
    }
    Ok(Prompt {
        system_text: SYSTEM_TEXT.into(),
        parts: vec![Part::Text { text: zero_shot_text(classes) }, Part::image(test_image, detail)],
        class_list: classes.to_vec(),
        shot_count: 0,
    })
}

pub fn exemplar_caption(category: &str) -> String {
    format!("Spectrogram for {category}:")
}

/// Few-shot prompt: intro, then per exemplar a caption and its image, then
/// the closing instruction and the test image.
pub fn build_few_shot_prompt(
    exemplars: &[(String, RenderedSpectrogram)],
    test_image: &RenderedSpectrogram,
    classes: &[String],
    detail: ImageDetail,
) -> Result<Prompt> {
    if exemplars.is_empty() {
        return Err(Error::Config("few-shot prompt needs at least one exemplar".into()));
    }
    if let Some((c, _)) = exemplars.iter().find(|(c, _)| !classes.contains(c)) {
        return Err(Error::Validation(format!("exemplar class {c} is not in the class list")));
    }
    let mut parts = Vec::with_capacity(2 * exemplars.len() + 3);
    parts.push(Part::Text { text: FEW_SHOT_INTRO.into() });
    for (category, image) in exemplars {
        parts.push(Part::Text { text: exemplar_caption(category) });
        parts.push(Part::image(image, detail));
    }
    parts.push(Part::Text { text: FEW_SHOT_CLOSING.into() });
    parts.push(Part::image(test_image, detail));
    Ok(Prompt {
        system_text: SYSTEM_TEXT.into(),
        parts,
        class_list: classes.to_vec(),
        shot_count: exemplars.len(),
    })
}
