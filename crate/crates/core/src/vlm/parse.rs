//! Maps free-text model output onto the closed class vocabulary.

use serde::{Deserialize, Serialize};

use super::ResponseStatus;

pub const DEFAULT_REFUSAL_PHRASES: &[&str] = &[
    "i cannot",
    "i can't",
    "i can not",
    "unable to",
    "i'm sorry",
    "i am sorry",
    "cannot determine",
    "not possible to determine",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseOptions {
    pub salvage: bool,
    pub refusal_phrases: Vec<String>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            salvage: true,
            refusal_phrases: DEFAULT_REFUSAL_PHRASES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Trim, drop trailing punctuation, lowercase, spaces to underscores.
pub fn normalize(raw: &str) -> String {
    let t = raw.trim().trim_end_matches(|c: char| c.is_ascii_punctuation() && c != '_');
    let t = t.trim().trim_start_matches(['"', '\'', '`', '*']);
    t.trim()
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("_")
}

/// Lowercased words with punctuation and underscores treated as separators.
fn words(raw: &str) -> Vec<String> {
    raw.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

fn contains_phrase(haystack: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && haystack.windows(phrase.len()).any(|w| w == phrase)
}

/// Returns the parsed label and status. Never returns a label outside `classes`.
pub fn parse_label(raw: &str, classes: &[String], opts: &ParseOptions) -> (Option<String>, ResponseStatus) {
    let norm = normalize(raw);
    if let Some(c) = classes.iter().find(|c| c.to_lowercase() == norm) {
        return (Some(c.clone()), ResponseStatus::Ok);
    }
    let lower = raw.to_lowercase();
    if opts.refusal_phrases.iter().any(|p| lower.contains(&p.to_lowercase())) {
        return (None, ResponseStatus::Refused);
    }
    if opts.salvage {
        let text = words(raw);
        let hits: Vec<&String> = classes.iter().filter(|c| contains_phrase(&text, &words(c))).collect();
        // a class whose words are a sub-phrase of another hit does not count separately
        let hits: Vec<&String> = hits
            .iter()
            .filter(|c| {
                let w = words(c);
                !hits.iter().any(|o| o != *c && words(o).len() > w.len() && contains_phrase(&words(o), &w))
            })
            .copied()
            .collect();
        if hits.len() == 1 {
            return (Some(hits[0].clone()), ResponseStatus::Ok);
        }
    }
    (None, ResponseStatus::Unparseable)
}
