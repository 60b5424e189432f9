//! Deterministic offline provider.

use super::{Part, Prompt, ProviderClient, ProviderError};
use crate::hash::sha256_hex;
use crate::render::{decode_png, Canvas};

/// Answers few-shot prompts with the class of the exemplar image closest to
/// the test image (squared RGB distance, first exemplar wins ties). Zero-shot
/// prompts get a class picked by hashing the image.
#[derive(Debug, Clone)]
pub struct MockProvider {
    model: String,
}

impl MockProvider {
    pub const PROVIDER: &'static str = "mock";

    pub fn new(model: impl Into<String>) -> Self {
        MockProvider { model: model.into() }
    }
}

impl Default for MockProvider {
    fn default() -> Self {
        MockProvider::new("nearest-exemplar")
    }
}

fn decode(part: &Part) -> Result<Canvas, ProviderError> {
    let bytes = part
        .image_bytes()
        .ok_or_else(|| ProviderError::Fatal("expected an image part".into()))?
        .map_err(|e| ProviderError::Fatal(e.to_string()))?;
    decode_png(&bytes).map_err(|e| ProviderError::Fatal(e.to_string()))
}

fn distance(a: &Canvas, b: &Canvas) -> Option<u64> {
    if a.width != b.width || a.height != b.height {
        return None;
    }
    Some(
        a.data
            .iter()
            .zip(&b.data)
            .map(|(&x, &y)| {
                let d = x as i64 - y as i64;
                (d * d) as u64
            })
            .sum(),
    )
}

impl ProviderClient for MockProvider {
    fn provider(&self) -> &str {
        Self::PROVIDER
    }

    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, prompt: &Prompt) -> Result<String, ProviderError> {
        let mut exemplars: Vec<(String, &Part)> = Vec::new();
        let mut caption: Option<String> = None;
        let mut test: Option<&Part> = None;
        for part in &prompt.parts {
            match part {
                Part::Text { text } => {
                    caption = text
                        .strip_prefix("Spectrogram for ")
                        .and_then(|t| t.strip_suffix(':'))
                        .map(str::to_string);
                }
                Part::Image { .. } => {
                    // uncaptioned images are test candidates; the last one wins
                    match caption.take() {
                        Some(c) => exemplars.push((c, part)),
                        None => test = Some(part),
                    }
                }
            }
        }
        let test = test.ok_or_else(|| ProviderError::Fatal("prompt has no test image".into()))?;
        if exemplars.is_empty() {
            if prompt.class_list.is_empty() {
                return Err(ProviderError::Fatal("prompt has no classes".into()));
            }
            let bytes = test.image_bytes().unwrap_or_else(|| Ok(Vec::new())).unwrap_or_default();
            let h = sha256_hex(&bytes);
            let idx = u64::from_str_radix(&h[..12], 16).unwrap_or(0) as usize % prompt.class_list.len();
            return Ok(prompt.class_list[idx].clone());
        }
        let test_img = decode(test)?;
        let mut best: Option<(u64, &str)> = None;
        for (category, part) in &exemplars {
            let img = decode(part)?;
            if let Some(d) = distance(&test_img, &img) {
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, category));
                }
            }
        }
        best.map(|(_, c)| c.to_string())
            .ok_or_else(|| ProviderError::Fatal("no exemplar matches the test image size".into()))
    }
}
