//! Dependency-graph edit scoring.
//!
//! A sample is described by a graph of yes/no questions about the edited
//! image. Instruction-critical questions (ICQ) are roots carrying the largest
//! fixed weight; instruction-dependent questions (IDQ) hang below them with a
//! weight that decays with depth; context-preserving questions (CPQ) are
//! independent roots with a small fixed weight. A question only counts as
//! passed when it and all of its ancestors were answered Yes. The score is
//! the passed weight over the total weight, and samples at or above `alpha`
//! are kept.
//!
//! Everything here is pure and `Send + Sync`.

mod metric;
mod types;
mod validate;

use thiserror::Error;

pub use metric::{edit_score, filter_decision, gate, idq_weight, Decision, QuestionScore, ScoreReport};
pub use types::{
    normalize_question_text, AnswerSet, DependencyGraph, Question, QuestionCategory, QuestionId, Verdict, Weights,
};
pub use validate::{validate_graph, ValidatedGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CategoryViolation {
    #[error("ICQ {0} has parents; ICQs must be roots")]
    ParentedIcq(QuestionId),
    #[error("CPQ {0} has parents; CPQs must be roots")]
    ParentedCpq(QuestionId),
    #[error("IDQ {0} has no parent")]
    OrphanIdq(QuestionId),
    #[error("IDQ {question} depends on CPQ {parent}; IDQ ancestry must reach an ICQ")]
    IdqUnderCpq { question: QuestionId, parent: QuestionId },
    #[error("graph has no ICQ")]
    NoIcq,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("graph has no questions")]
    EmptyGraph,
    #[error("cycle detected: {} -> {}", join_ids(cycle), cycle.first().map(QuestionId::as_str).unwrap_or(""))]
    CycleDetected { cycle: Vec<QuestionId> },
    #[error("unresolved parent references: {}", unresolved.iter().map(|(q, p)| format!("{q} -> {p}")).collect::<Vec<_>>().join(", "))]
    DanglingParent { unresolved: Vec<(QuestionId, QuestionId)> },
    #[error("category violation: {0}")]
    CategoryViolation(#[from] CategoryViolation),
    #[error("IDQ depth must be at least 1, got {depth}")]
    DomainError { depth: u32 },
    #[error("answers do not match graph (missing: [{}], extra: [{}])", join_list(missing), join_list(extra))]
    AnswerMismatch { missing: Vec<QuestionId>, extra: Vec<QuestionId> },
    #[error("{field} out of range: {value} (expected {expected})")]
    InvalidWeights { field: &'static str, value: f64, expected: &'static str },
    #[error("unknown question category {0:?}")]
    UnknownCategory(String),
    #[error("question {0} has empty text")]
    EmptyQuestionText(QuestionId),
    #[error("question {question} lists parent {parent} twice")]
    DuplicateParent { question: QuestionId, parent: QuestionId },
    #[error("duplicate question id {0}")]
    DuplicateQuestionId(QuestionId),
}

fn join_ids(ids: &[QuestionId]) -> String {
    ids.iter().map(QuestionId::as_str).collect::<Vec<_>>().join(" -> ")
}

fn join_list(ids: &[QuestionId]) -> String {
    ids.iter().map(QuestionId::as_str).collect::<Vec<_>>().join(", ")
}
