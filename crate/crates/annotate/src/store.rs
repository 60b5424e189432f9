//! In-memory session table backed by one event log per session.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::Serialize;
use vsc_core::{EvalResult, PredictionRecord};

use crate::error::{AnnotateError, Result};
use crate::session::{item_order, log_paths, now_ms, Event, EventLog, Progress, Session, SessionState};
use crate::study::{ExemplarRef, Study};

struct Slot {
    /// Latest state; readers clone the Arc and never wait on writers.
    snapshot: RwLock<Arc<Session>>,
    /// Serializes mutations of one session through its log.
    log: Mutex<EventLog>,
}

pub struct Store {
    study: Study,
    dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionView {
    pub session_id: String,
    pub expert_id: String,
    pub test_fold: u8,
    pub state: SessionState,
    pub progress: Progress,
    pub first_unanswered: Option<usize>,
    pub classes: Vec<String>,
    pub exemplars: Vec<ExemplarRef>,
    /// The expert's own labels by position.
    pub answers: Vec<Option<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemView {
    pub index: usize,
    pub image: String,
    pub exemplars: Vec<ExemplarRef>,
    pub classes: Vec<String>,
    pub progress: Progress,
    pub state: SessionState,
    pub answer: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finalized {
    pub session_id: String,
    pub expert_id: String,
    pub records: Vec<PredictionRecord>,
    pub result: EvalResult,
}

fn token() -> String {
    hex::encode(rand::random::<[u8; 16]>())
}

impl Store {
    /// Opens `dir`, replaying every session log found there.
    pub fn open(study: Study, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| AnnotateError::io(dir, e))?;
        let mut sessions = HashMap::new();
        for path in log_paths(dir)? {
            let (log, session) = EventLog::open(&path)?;
            if session.exemplars_hash != study.exemplars_hash {
                return Err(AnnotateError::Log {
                    path,
                    message: "session was created against a different exemplar set".into(),
                });
            }
            tracing::debug!(session = %session.id, answered = session.answers.len(), "replayed session");
            let slot = Slot { snapshot: RwLock::new(Arc::new(session)), log: Mutex::new(log) };
            let id = slot.snapshot.read().unwrap().id.clone();
            sessions.insert(id, Arc::new(slot));
        }
        tracing::info!(sessions = sessions.len(), dir = %dir.display(), "session store ready");
        Ok(Store { study, dir: dir.to_path_buf(), sessions: RwLock::new(sessions) })
    }

    pub fn study(&self) -> &Study {
        &self.study
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>> {
        self.sessions.read().unwrap().get(id).cloned().ok_or_else(|| AnnotateError::UnknownSession(id.to_string()))
    }

    pub fn snapshot(&self, id: &str) -> Result<Arc<Session>> {
        Ok(self.slot(id)?.snapshot.read().unwrap().clone())
    }

    /// Every session, ordered by expert then id.
    pub fn all(&self) -> Vec<Arc<Session>> {
        let mut v: Vec<Arc<Session>> = self.sessions.read().unwrap().values().map(|s| s.snapshot.read().unwrap().clone()).collect();
        v.sort_by(|a, b| (&a.expert_id, &a.id).cmp(&(&b.expert_id, &b.id)));
        v
    }

    /// Opens a session on `test_fold` (the exemplar set's excluded fold by default).
    pub fn create(&self, expert_id: &str, test_fold: Option<u8>, seed: u64) -> Result<SessionView> {
        let expert_id = expert_id.trim();
        if expert_id.is_empty() {
            return Err(AnnotateError::Validation("expert_id must not be empty".into()));
        }
        let fold = test_fold.unwrap_or(self.study.exemplars.excluded_fold);
        if let Some((_, m)) = self.study.exemplars.ordered().into_iter().find(|(_, m)| m.fold == fold) {
            return Err(AnnotateError::Validation(format!("exemplar {} comes from test fold {fold}", m.filename)));
        }
        let items = self.study.fold_items(fold);
        if items.is_empty() {
            return Err(AnnotateError::Validation(format!("fold {fold} has no items")));
        }
        let id = loop {
            let t = token();
            if !self.sessions.read().unwrap().contains_key(&t) {
                break t;
            }
        };
        let created = Event::Created {
            session_id: id.clone(),
            expert_id: expert_id.to_string(),
            test_fold: fold,
            seed,
            exemplars_hash: self.study.exemplars_hash.clone(),
            classes: self.study.classes.clone(),
            item_order: item_order(&items, expert_id, seed),
            at_ms: now_ms(),
        };
        let (log, session) = EventLog::create(&self.dir, &created)?;
        tracing::info!(session = %id, expert = expert_id, fold, "session created");
        let view = self.view(&session);
        let slot = Slot { snapshot: RwLock::new(Arc::new(session)), log: Mutex::new(log) };
        self.sessions.write().unwrap().insert(id, Arc::new(slot));
        Ok(view)
    }

    pub fn view(&self, s: &Session) -> SessionView {
        let missing = s.missing();
        SessionView {
            session_id: s.id.clone(),
            expert_id: s.expert_id.clone(),
            test_fold: s.test_fold,
            state: s.state,
            progress: s.progress(),
            first_unanswered: missing.first().copied(),
            classes: s.classes.clone(),
            exemplars: self.study.exemplar_refs(),
            answers: (0..s.item_order.len()).map(|i| s.answers.get(&i).map(|a| a.category.clone())).collect(),
        }
    }

    pub fn session(&self, id: &str) -> Result<SessionView> {
        let s = self.snapshot(id)?;
        Ok(self.view(&s))
    }

    /// Item payload. Completed sessions stay readable for review.
    pub fn item(&self, id: &str, index: usize) -> Result<ItemView> {
        let s = self.snapshot(id)?;
        s.check_index(index)?;
        Ok(ItemView {
            index,
            image: self.study.image_url(&s.item_order[index].filename),
            exemplars: self.study.exemplar_refs(),
            classes: s.classes.clone(),
            progress: s.progress(),
            state: s.state,
            answer: s.answers.get(&index).map(|a| a.category.clone()),
        })
    }

    /// Applies the event `build` derives from the current state, if any.
    fn mutate(&self, id: &str, build: impl FnOnce(&Session) -> Result<Option<Event>>) -> Result<Arc<Session>> {
        let slot = self.slot(id)?;
        let mut log = slot.log.lock().unwrap();
        let current = slot.snapshot.read().unwrap().clone();
        let Some(ev) = build(&current)? else {
            return Ok(current);
        };
        let mut next = (*current).clone();
        next.apply(&ev).map_err(AnnotateError::Validation)?;
        log.append(&ev)?;
        let next = Arc::new(next);
        *slot.snapshot.write().unwrap() = next.clone();
        Ok(next)
    }

    pub fn answer(&self, id: &str, index: usize, category: &str) -> Result<Progress> {
        Ok(self.mutate(id, |s| s.answer_event(index, category).map(Some))?.progress())
    }

    /// Closes the session and joins ground truth. Repeating it on a complete
    /// session returns the same records.
    pub fn finalize(&self, id: &str) -> Result<Finalized> {
        let s = self.mutate(id, |s| {
            if s.state == SessionState::Complete {
                return Ok(None);
            }
            let missing = s.missing();
            if !missing.is_empty() {
                return Err(AnnotateError::Incomplete { missing });
            }
            Ok(Some(Event::Finalized { at_ms: now_ms() }))
        })?;
        let (records, result) = s.evaluate()?;
        tracing::info!(session = %s.id, expert = %s.expert_id, correct = result.n_correct, "session finalized");
        Ok(Finalized { session_id: s.id.clone(), expert_id: s.expert_id.clone(), records, result })
    }
}
