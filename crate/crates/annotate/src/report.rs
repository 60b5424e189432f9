//! Study aggregate over finalized sessions.

use vsc_core::eval::{ensemble_majority, evaluate, mean_pairwise_kappa, Accounting, StudySummary};
use vsc_core::PredictionRecord;

use crate::error::{AnnotateError, Result};
use crate::session::{Session, SessionState};

pub const ENSEMBLE_RULE: &str = "per-item majority vote; an abstention counts as its own option; ties drawn uniformly with a per-item seed";

/// Kappa matrix and ensemble over the complete sessions, one per expert.
pub fn study_summary(sessions: &[impl AsRef<Session>], accounting: Accounting, tie_break_seed: u64) -> Result<StudySummary> {
    let mut done: Vec<&Session> = sessions.iter().map(AsRef::as_ref).filter(|s| s.state == SessionState::Complete).collect();
    done.sort_by(|a, b| a.expert_id.cmp(&b.expert_id));
    if let Some(w) = done.windows(2).find(|w| w[0].expert_id == w[1].expert_id) {
        return Err(AnnotateError::Validation(format!("expert {} has more than one finalized session", w[0].expert_id)));
    }
    if done.len() < 2 {
        return Err(AnnotateError::Validation(format!("study report needs at least two finalized sessions, found {}", done.len())));
    }
    let classes = done[0].classes.clone();
    let mut experts = Vec::new();
    let mut annotations: Vec<Vec<PredictionRecord>> = Vec::new();
    for s in &done {
        let (records, result) = s.evaluate()?;
        experts.push((s.expert_id.clone(), result));
        annotations.push(records);
    }
    let kappa = mean_pairwise_kappa(&annotations)?;
    let ensemble = evaluate(&ensemble_majority(&annotations, tie_break_seed)?, &classes)?;
    Ok(StudySummary { accounting, experts, kappa, ensemble, ensemble_rule: ENSEMBLE_RULE.to_string(), tie_break_seed })
}
