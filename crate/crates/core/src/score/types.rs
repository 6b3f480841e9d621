use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ScoreError;

/// Role a question plays in the dependency graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuestionCategory {
    /// Instruction-critical: tests the core objective of the edit. Always a root.
    #[serde(rename = "ICQ")]
    Icq,
    /// Instruction-dependent: a detail of some ICQ subject. Weight decays with depth.
    #[serde(rename = "IDQ")]
    Idq,
    /// Context-preserving: checks that unedited regions are unchanged. Always a root.
    #[serde(rename = "CPQ")]
    Cpq,
}

impl QuestionCategory {
    pub const ALL: [QuestionCategory; 3] = [Self::Icq, Self::Idq, Self::Cpq];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Icq => "ICQ",
            Self::Idq => "IDQ",
            Self::Cpq => "CPQ",
        }
    }
}

impl fmt::Display for QuestionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuestionCategory {
    type Err = ScoreError;

    /// Case-insensitive: `icq`, `Icq` and `ICQ` all parse.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ICQ" => Ok(Self::Icq),
            "IDQ" => Ok(Self::Idq),
            "CPQ" => Ok(Self::Cpq),
            _ => Err(ScoreError::UnknownCategory(s.to_string())),
        }
    }
}

/// Opaque question identifier, unique within a graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuestionId(String);

impl QuestionId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for QuestionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for QuestionId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// Trim, collapse internal whitespace and make sure the text ends in `?`.
///
/// Returns `None` when nothing but whitespace or question marks remain.
pub fn normalize_question_text(text: &str) -> Option<String> {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if collapsed.trim_end_matches('?').trim().is_empty() {
        return None;
    }
    if collapsed.ends_with('?') {
        Some(collapsed)
    } else {
        Some(format!("{collapsed}?"))
    }
}

/// An atomic yes/no question about the edited image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    id: QuestionId,
    text: String,
    category: QuestionCategory,
    parents: Vec<QuestionId>,
}

impl Question {
    /// Builds a question, normalizing its text. Parent order is kept, duplicates rejected.
    pub fn new(
        id: impl Into<QuestionId>,
        text: &str,
        category: QuestionCategory,
        parents: impl IntoIterator<Item = QuestionId>,
    ) -> Result<Self, ScoreError> {
        let id = id.into();
        let text = normalize_question_text(text).ok_or_else(|| ScoreError::EmptyQuestionText(id.clone()))?;
        let mut seen = Vec::new();
        for p in parents {
            if seen.contains(&p) {
                return Err(ScoreError::DuplicateParent { question: id, parent: p });
            }
            seen.push(p);
        }
        Ok(Self { id, text, category, parents: seen })
    }

    /// Convenience for ICQ/CPQ roots.
    pub fn root(id: &str, text: &str, category: QuestionCategory) -> Result<Self, ScoreError> {
        Self::new(id, text, category, [])
    }

    pub fn id(&self) -> &QuestionId {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn category(&self) -> QuestionCategory {
        self.category
    }

    pub fn parents(&self) -> &[QuestionId] {
        &self.parents
    }
}

impl From<String> for QuestionId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// Questions for one sample, in document order, with unique ids.
///
/// Structural rules (acyclicity, category placement) are checked by
/// [`validate_graph`](super::validate_graph), not here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyGraph {
    sample_id: String,
    questions: Vec<Question>,
    index: HashMap<QuestionId, usize>,
}

impl DependencyGraph {
    pub fn new(sample_id: impl Into<String>, questions: Vec<Question>) -> Result<Self, ScoreError> {
        let mut index = HashMap::with_capacity(questions.len());
        for (i, q) in questions.iter().enumerate() {
            if index.insert(q.id.clone(), i).is_some() {
                return Err(ScoreError::DuplicateQuestionId(q.id.clone()));
            }
        }
        Ok(Self { sample_id: sample_id.into(), questions, index })
    }

    pub fn sample_id(&self) -> &str {
        &self.sample_id
    }

    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn get(&self, id: &QuestionId) -> Option<&Question> {
        self.index.get(id).map(|&i| &self.questions[i])
    }

    pub(crate) fn position(&self, id: &QuestionId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn with_sample_id(mut self, sample_id: impl Into<String>) -> Self {
        self.sample_id = sample_id.into();
        self
    }
}

/// A VQA answer after normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Yes,
    No,
    Unparseable,
}

impl Verdict {
    pub fn is_yes(self) -> bool {
        matches!(self, Verdict::Yes)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
            Verdict::Unparseable => "unparseable",
        }
    }
}

/// One verdict per question of a graph.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnswerSet {
    verdicts: BTreeMap<QuestionId, Verdict>,
}

impl AnswerSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: QuestionId, verdict: Verdict) -> Option<Verdict> {
        self.verdicts.insert(id, verdict)
    }

    pub fn get(&self, id: &QuestionId) -> Option<Verdict> {
        self.verdicts.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.verdicts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verdicts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&QuestionId, Verdict)> {
        self.verdicts.iter().map(|(k, v)| (k, *v))
    }

    /// Every question answered with the same verdict.
    pub fn uniform(graph: &DependencyGraph, verdict: Verdict) -> Self {
        graph.questions().iter().map(|q| (q.id().clone(), verdict)).collect()
    }
}

impl FromIterator<(QuestionId, Verdict)> for AnswerSet {
    fn from_iter<T: IntoIterator<Item = (QuestionId, Verdict)>>(iter: T) -> Self {
        Self { verdicts: iter.into_iter().collect() }
    }
}

/// Metric constants and the acceptance threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    w_icq: f64,
    w_cpq: f64,
    t_decay: f64,
    alpha: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self { w_icq: 3.0, w_cpq: 1.0, t_decay: 0.3, alpha: 0.8 }
    }
}

impl Weights {
    pub fn new(w_icq: f64, w_cpq: f64, t_decay: f64, alpha: f64) -> Result<Self, ScoreError> {
        let w = Self { w_icq, w_cpq, t_decay, alpha };
        w.check()?;
        Ok(w)
    }

    /// Re-checks the invariants; needed after deserializing.
    pub fn check(&self) -> Result<(), ScoreError> {
        let bad = |field: &'static str, value: f64, expected: &'static str| {
            Err(ScoreError::InvalidWeights { field, value, expected })
        };
        if !(self.w_cpq.is_finite() && self.w_cpq > 0.0) {
            return bad("w_cpq", self.w_cpq, "a positive number");
        }
        if !(self.w_icq.is_finite() && self.w_icq >= self.w_cpq) {
            return bad("w_icq", self.w_icq, "a number >= w_cpq");
        }
        if !(self.t_decay > 0.0 && self.t_decay < 1.0) {
            return bad("t_decay", self.t_decay, "in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha", self.alpha, "in [0, 1]");
        }
        Ok(())
    }

    pub fn w_icq(&self) -> f64 {
        self.w_icq
    }

    pub fn w_cpq(&self) -> f64 {
        self.w_cpq
    }

    pub fn t_decay(&self) -> f64 {
        self.t_decay
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self, ScoreError> {
        Self::new(self.w_icq, self.w_cpq, self.t_decay, alpha)
    }
}
