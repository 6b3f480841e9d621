use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::types::{AnswerSet, QuestionCategory, QuestionId, Verdict, Weights};
use super::validate::ValidatedGraph;
use super::ScoreError;

/// Filter outcome for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Keep,
    Drop,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Keep => "Keep",
            Decision::Drop => "Drop",
        })
    }
}

/// Weight of an instruction-dependent question at `depth` edges below its
/// nearest ICQ: `1 + w_icq * t_decay^depth`.
pub fn idq_weight(depth: u32, weights: &Weights) -> Result<f64, ScoreError> {
    if depth < 1 {
        return Err(ScoreError::DomainError { depth });
    }
    // repeated multiplication keeps small depths exact to the last ulp
    let mut decay = 1.0;
    for _ in 0..depth {
        decay *= weights.t_decay();
    }
    Ok(1.0 + weights.w_icq() * decay)
}

/// Keep iff `score >= alpha`.
pub fn filter_decision(score: f64, weights: &Weights) -> Decision {
    if score >= weights.alpha() {
        Decision::Keep
    } else {
        Decision::Drop
    }
}

fn check_coverage(validated: &ValidatedGraph, answers: &AnswerSet) -> Result<(), ScoreError> {
    let graph = validated.graph();
    let missing: Vec<QuestionId> =
        graph.questions().iter().filter(|q| answers.get(q.id()).is_none()).map(|q| q.id().clone()).collect();
    let extra: Vec<QuestionId> =
        answers.iter().filter(|(id, _)| graph.get(id).is_none()).map(|(id, _)| id.clone()).collect();
    if missing.is_empty() && extra.is_empty() {
        Ok(())
    } else {
        Err(ScoreError::AnswerMismatch { missing, extra })
    }
}

/// Gated indicators in graph document order.
fn gate_indices(validated: &ValidatedGraph, answers: &AnswerSet) -> Result<Vec<bool>, ScoreError> {
    check_coverage(validated, answers)?;
    let questions = validated.graph().questions();
    let mut passed = vec![false; questions.len()];
    for &i in validated.topo_order() {
        let own = answers.get(questions[i].id()).is_some_and(Verdict::is_yes);
        passed[i] = own && validated.parent_indices(i).iter().all(|&p| passed[p]);
    }
    Ok(passed)
}

/// A question's indicator is 1 iff it and every ancestor were answered Yes.
/// Unparseable counts as No.
pub fn gate(validated: &ValidatedGraph, answers: &AnswerSet) -> Result<BTreeMap<QuestionId, u8>, ScoreError> {
    let passed = gate_indices(validated, answers)?;
    Ok(validated.graph().questions().iter().zip(passed).map(|(q, ok)| (q.id().clone(), u8::from(ok))).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionScore {
    pub depth: Option<u32>,
    pub weight: f64,
    pub delta: u8,
}

/// Per-question weights and indicators, plus the normalized score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreReport {
    pub sample_id: String,
    pub score: f64,
    pub decision: Decision,
    pub numerator: f64,
    pub denominator: f64,
    pub per_question: BTreeMap<QuestionId, QuestionScore>,
    /// Questions whose VQA reply could not be read as yes or no.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unparseable: Vec<QuestionId>,
}

/// Weighted, parent-gated edit score of one sample.
///
/// Every question contributes its weight to the denominator regardless of
/// gating, so a failed parent costs its children too.
pub fn edit_score(
    validated: &ValidatedGraph,
    answers: &AnswerSet,
    weights: &Weights,
) -> Result<ScoreReport, ScoreError> {
    weights.check()?;
    let passed = gate_indices(validated, answers)?;
    let questions = validated.graph().questions();

    let mut numerator = 0.0;
    let mut denominator = 0.0;
    let mut per_question = BTreeMap::new();
    let mut unparseable = Vec::new();
    for (i, q) in questions.iter().enumerate() {
        let depth = validated.depth_at(i);
        let weight = match q.category() {
            QuestionCategory::Icq => weights.w_icq(),
            QuestionCategory::Cpq => weights.w_cpq(),
            QuestionCategory::Idq => idq_weight(depth.expect("validated IDQ has a depth"), weights)?,
        };
        let delta = u8::from(passed[i]);
        numerator += weight * f64::from(delta);
        denominator += weight;
        if answers.get(q.id()) == Some(Verdict::Unparseable) {
            unparseable.push(q.id().clone());
        }
        per_question.insert(q.id().clone(), QuestionScore { depth, weight, delta });
    }

    let score = numerator / denominator;
    Ok(ScoreReport {
        sample_id: validated.graph().sample_id().to_string(),
        score,
        decision: filter_decision(score, weights),
        numerator,
        denominator,
        per_question,
        unparseable,
    })
}
