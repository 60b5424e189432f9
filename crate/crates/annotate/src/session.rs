//! Session state machine and its event log.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use vsc_core::eval::evaluate;
use vsc_core::hash::salted_seed;
use vsc_core::{ClipMeta, EvalResult, PredictionRecord};

use crate::error::{AnnotateError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionState {
    Open,
    Complete,
}

impl SessionState {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionState::Open => "open",
            SessionState::Complete => "complete",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub answered: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub category: String,
    pub at_ms: u64,
}

/// One line of a session log. Item metadata lives only here and in memory,
/// never in API responses before finalize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
pub enum Event {
    Created {
        session_id: String,
        expert_id: String,
        test_fold: u8,
        seed: u64,
        exemplars_hash: String,
        classes: Vec<String>,
        item_order: Vec<ClipMeta>,
        at_ms: u64,
    },
    Answered {
        index: usize,
        category: String,
        at_ms: u64,
    },
    Finalized {
        at_ms: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: String,
    pub expert_id: String,
    pub test_fold: u8,
    pub seed: u64,
    pub exemplars_hash: String,
    pub classes: Vec<String>,
    pub item_order: Vec<ClipMeta>,
    /// Keyed by position in `item_order`.
    pub answers: BTreeMap<usize, Answer>,
    pub state: SessionState,
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// Presentation order for `(expert_id, seed)`: `items` sorted by file name,
/// then shuffled by a ChaCha8 stream seeded from both.
pub fn item_order(items: &[ClipMeta], expert_id: &str, seed: u64) -> Vec<ClipMeta> {
    let mut order = items.to_vec();
    order.sort_by(|a, b| a.filename.cmp(&b.filename));
    let mut rng = ChaCha8Rng::seed_from_u64(salted_seed(expert_id, seed));
    order.shuffle(&mut rng);
    order
}

impl Session {
    fn from_created(ev: &Event) -> Option<Session> {
        match ev {
            Event::Created { session_id, expert_id, test_fold, seed, exemplars_hash, classes, item_order, .. } => Some(Session {
                id: session_id.clone(),
                expert_id: expert_id.clone(),
                test_fold: *test_fold,
                seed: *seed,
                exemplars_hash: exemplars_hash.clone(),
                classes: classes.clone(),
                item_order: item_order.clone(),
                answers: BTreeMap::new(),
                state: SessionState::Open,
            }),
            _ => None,
        }
    }

    pub fn progress(&self) -> Progress {
        Progress { answered: self.answers.len(), total: self.item_order.len() }
    }

    pub fn missing(&self) -> Vec<usize> {
        (0..self.item_order.len()).filter(|i| !self.answers.contains_key(i)).collect()
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.item_order.len() {
            return Err(AnnotateError::Range { index, len: self.item_order.len() });
        }
        Ok(())
    }

    /// Validates an answer and returns the event that records it.
    pub fn answer_event(&self, index: usize, category: &str) -> Result<Event> {
        if self.state == SessionState::Complete {
            return Err(AnnotateError::State("complete"));
        }
        self.check_index(index)?;
        if !self.classes.iter().any(|c| c == category) {
            return Err(AnnotateError::Validation(format!("`{category}` is not one of the study classes")));
        }
        Ok(Event::Answered { index, category: category.to_string(), at_ms: now_ms() })
    }

    pub fn apply(&mut self, ev: &Event) -> Result<(), String> {
        match ev {
            Event::Created { .. } => return Err("duplicate created event".into()),
            Event::Answered { index, category, at_ms } => {
                if self.state == SessionState::Complete {
                    return Err("answer after finalize".into());
                }
                if *index >= self.item_order.len() {
                    return Err(format!("answer index {index} out of range"));
                }
                // last write wins
                self.answers.insert(*index, Answer { category: category.clone(), at_ms: *at_ms });
            }
            Event::Finalized { .. } => {
                if !self.missing().is_empty() {
                    return Err("finalize with unanswered items".into());
                }
                self.state = SessionState::Complete;
            }
        }
        Ok(())
    }

    /// Joins answers with ground truth, in file-name order.
    pub fn records(&self) -> Result<Vec<PredictionRecord>> {
        let missing = self.missing();
        if !missing.is_empty() {
            return Err(AnnotateError::Incomplete { missing });
        }
        let mut records: Vec<PredictionRecord> = self
            .item_order
            .iter()
            .enumerate()
            .map(|(i, m)| PredictionRecord::answered(m.clone(), self.answers[&i].category.clone(), self.expert_id.clone()))
            .collect();
        records.sort_by(|a, b| a.item.filename.cmp(&b.item.filename));
        Ok(records)
    }

    pub fn evaluate(&self) -> Result<(Vec<PredictionRecord>, EvalResult)> {
        let records = self.records()?;
        let result = evaluate(&records, &self.classes)?;
        Ok((records, result))
    }
}

/// Append-only JSONL log for one session.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    pub fn path_for(dir: &Path, session_id: &str) -> PathBuf {
        dir.join(format!("{session_id}.jsonl"))
    }

    pub fn create(dir: &Path, created: &Event) -> Result<(EventLog, Session)> {
        let session = Session::from_created(created).ok_or_else(|| AnnotateError::Validation("log must start with a created event".into()))?;
        let path = Self::path_for(dir, &session.id);
        let file = OpenOptions::new().create_new(true).append(true).open(&path).map_err(|e| AnnotateError::io(&path, e))?;
        let mut log = EventLog { path, file };
        log.append(created)?;
        Ok((log, session))
    }

    pub fn append(&mut self, ev: &Event) -> Result<()> {
        let mut line = serde_json::to_vec(ev).map_err(vsc_core::Error::from)?;
        line.push(b'\n');
        self.file.write_all(&line).map_err(|e| AnnotateError::io(&self.path, e))?;
        self.file.sync_data().map_err(|e| AnnotateError::io(&self.path, e))
    }

    /// Replays a log without modifying it. Returns the session and the
    /// byte length of its intact prefix. A torn final line (crash
    /// mid-append) is skipped; damage anywhere else is an error.
    pub fn replay(path: &Path) -> Result<(Session, u64)> {
        let corrupt = |message: String| AnnotateError::Log { path: path.to_path_buf(), message };
        let reader = BufReader::new(File::open(path).map_err(|e| AnnotateError::io(path, e))?);
        let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>().map_err(|e| AnnotateError::io(path, e))?;
        let mut session: Option<Session> = None;
        let mut good_bytes = 0u64;
        for (n, line) in lines.iter().enumerate() {
            let ev: Event = match serde_json::from_str(line) {
                Ok(ev) => ev,
                Err(e) if n + 1 == lines.len() => {
                    tracing::warn!(path = %path.display(), error = %e, "dropping torn final log line");
                    break;
                }
                Err(e) => return Err(corrupt(format!("line {}: {e}", n + 1))),
            };
            match session.as_mut() {
                None => session = Some(Session::from_created(&ev).ok_or_else(|| corrupt("first event is not `created`".into()))?),
                Some(s) => s.apply(&ev).map_err(|m| corrupt(format!("line {}: {m}", n + 1)))?,
            }
            good_bytes += line.len() as u64 + 1;
        }
        Ok((session.ok_or_else(|| corrupt("empty log".into()))?, good_bytes))
    }

    /// Replays a log and reopens it for appending, cutting off a torn tail.
    pub fn open(path: &Path) -> Result<(EventLog, Session)> {
        let (session, good_bytes) = Self::replay(path)?;
        let mut file = OpenOptions::new().append(true).open(path).map_err(|e| AnnotateError::io(path, e))?;
        let len = file.metadata().map_err(|e| AnnotateError::io(path, e))?.len();
        if len > good_bytes {
            file.set_len(good_bytes).map_err(|e| AnnotateError::io(path, e))?;
        } else if len < good_bytes {
            // intact last event without its newline
            file.write_all(b"\n").map_err(|e| AnnotateError::io(path, e))?;
        }
        Ok((EventLog { path: path.to_path_buf(), file }, session))
    }
}

pub(crate) fn log_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| AnnotateError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    Ok(paths)
}

/// Every session log in `dir`, replayed read-only, ordered by file name.
pub fn load_sessions(dir: &Path) -> Result<Vec<Session>> {
    log_paths(dir)?.iter().map(|p| EventLog::replay(p).map(|(s, _)| s)).collect()
}
