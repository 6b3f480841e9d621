//! JSON documents exchanged with other tools: dependency graphs, answer sets
//! and score reports. Parsing is strict; unknown fields are rejected.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::score::{
    AnswerSet, DependencyGraph, Question, QuestionCategory, QuestionId, ScoreError, ScoreReport, Verdict,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DocumentError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema violation: {0}")]
    Schema(#[from] ScoreError),
}

impl DocumentError {
    fn from_json(e: serde_json::Error) -> Self {
        DocumentError::Parse { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct QuestionDoc {
    pub id: String,
    pub text: String,
    pub category: String,
    #[serde(default)]
    pub parents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    sample_id: String,
    questions: Vec<QuestionDoc>,
}

/// Line and column (1-based) of the `n`th `"id": "<value>"` pair equal to `value`.
fn locate_id(text: &str, value: &str, nth: usize) -> (usize, usize) {
    let needle = serde_json::to_string(value).unwrap_or_default();
    let mut seen = 0;
    let mut from = 0;
    while let Some(off) = text[from..].find("\"id\"") {
        let key_end = from + off + 4;
        let rest = text[key_end..].trim_start();
        let rest = rest.strip_prefix(':').map(str::trim_start).unwrap_or(rest);
        if rest.starts_with(&needle) {
            seen += 1;
            if seen == nth {
                let pos = text.len() - rest.len();
                let line = text[..pos].matches('\n').count() + 1;
                let column = pos - text[..pos].rfind('\n').map_or(0, |i| i + 1) + 1;
                return (line, column);
            }
        }
        from = key_end;
    }
    (0, 0)
}

pub(crate) fn questions_from_docs(docs: Vec<QuestionDoc>, source: &str) -> Result<Vec<Question>, DocumentError> {
    let mut ids = HashSet::new();
    let mut out = Vec::with_capacity(docs.len());
    for doc in docs {
        if !ids.insert(doc.id.clone()) {
            let (line, column) = locate_id(source, &doc.id, 2);
            return Err(DocumentError::Parse { line, column, message: format!("duplicate question id {:?}", doc.id) });
        }
        let category: QuestionCategory = doc.category.parse().map_err(|_| {
            let (line, column) = locate_id(source, &doc.id, 1);
            DocumentError::Parse {
                line,
                column,
                message: format!("unknown category {:?} for question {:?}", doc.category, doc.id),
            }
        })?;
        let parents = doc.parents.into_iter().map(QuestionId::from);
        out.push(Question::new(doc.id, &doc.text, category, parents)?);
    }
    Ok(out)
}

/// Parses a graph document. Categories are case-folded and question text
/// normalized; structural rules are left to `validate_graph`.
pub fn parse_graph_document(text: &str) -> Result<DependencyGraph, DocumentError> {
    let doc: GraphDoc = serde_json::from_str(text).map_err(DocumentError::from_json)?;
    let questions = questions_from_docs(doc.questions, text)?;
    Ok(DependencyGraph::new(doc.sample_id, questions)?)
}

pub(crate) fn question_docs(graph: &DependencyGraph) -> Vec<QuestionDoc> {
    graph
        .questions()
        .iter()
        .map(|q| QuestionDoc {
            id: q.id().to_string(),
            text: q.text().to_string(),
            category: q.category().as_str().to_string(),
            parents: q.parents().iter().map(ToString::to_string).collect(),
        })
        .collect()
}

impl Serialize for DependencyGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GraphDoc { sample_id: self.sample_id().to_string(), questions: question_docs(self) }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DependencyGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = GraphDoc::deserialize(d)?;
        let questions = questions_from_docs(doc.questions, "").map_err(serde::de::Error::custom)?;
        DependencyGraph::new(doc.sample_id, questions).map_err(serde::de::Error::custom)
    }
}

/// Canonical graph document: fixed field order, upper-case categories.
pub fn graph_to_document(graph: &DependencyGraph) -> String {
    let doc = GraphDoc { sample_id: graph.sample_id().to_string(), questions: question_docs(graph) };
    serde_json::to_string_pretty(&doc).expect("graph document serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerDocument {
    pub sample_id: String,
    pub verdicts: BTreeMap<QuestionId, Verdict>,
}

impl AnswerDocument {
    pub fn new(sample_id: impl Into<String>, answers: &AnswerSet) -> Self {
        Self { sample_id: sample_id.into(), verdicts: answers.iter().map(|(k, v)| (k.clone(), v)).collect() }
    }

    pub fn answers(&self) -> AnswerSet {
        self.verdicts.iter().map(|(k, v)| (k.clone(), *v)).collect()
    }
}

pub fn parse_answer_document(text: &str) -> Result<AnswerDocument, DocumentError> {
    serde_json::from_str(text).map_err(DocumentError::from_json)
}

pub fn answers_to_document(doc: &AnswerDocument) -> String {
    serde_json::to_string_pretty(doc).expect("answer document serializes")
}

pub fn report_to_document(report: &ScoreReport) -> String {
    serde_json::to_string_pretty(report).expect("score report serializes")
}

pub fn parse_report_document(text: &str) -> Result<ScoreReport, DocumentError> {
    serde_json::from_str(text).map_err(DocumentError::from_json)
}
