//! Dependency-graph construction through a structured-text backend.
//!
//! Component parsing, dependency linking, question generation and question
//! classification are requested in one prompt. The reply must be a graph
//! document (optionally with a `components` list); anything else is a schema
//! violation kept together with the raw reply.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, BackendRequest, Role, StructuredTextBackend};
use crate::document::{questions_from_docs, DocumentError, QuestionDoc};
use crate::score::{validate_graph, CategoryViolation, DependencyGraph, ScoreError, ValidatedGraph};
use crate::template::{PromptTemplate, TemplateError};

pub const DEFAULT_MAX_QUESTIONS: usize = 40;

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("invalid extraction request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("extraction reply violates schema: {reason}")]
    SchemaViolation { reason: String, raw: String },
    #[error("extraction produced no instruction-critical question")]
    EmptyExtraction { raw: String },
}

impl ExtractionError {
    /// The backend reply that was rejected, if any.
    pub fn raw_reply(&self) -> Option<&str> {
        match self {
            ExtractionError::SchemaViolation { raw, .. } | ExtractionError::EmptyExtraction { raw } => Some(raw),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionRequest {
    pub sample_id: String,
    pub edit_instruction: String,
    pub edited_description: String,
    pub template_version: String,
}

impl ExtractionRequest {
    pub fn new(
        sample_id: impl Into<String>,
        edit_instruction: impl Into<String>,
        edited_description: impl Into<String>,
        template_version: impl Into<String>,
    ) -> Result<Self, ExtractionError> {
        let req = Self {
            sample_id: sample_id.into(),
            edit_instruction: edit_instruction.into(),
            edited_description: edited_description.into(),
            template_version: template_version.into(),
        };
        if req.edit_instruction.trim().is_empty() {
            return Err(ExtractionError::InvalidRequest("edit instruction is empty".into()));
        }
        if req.edited_description.trim().is_empty() {
            return Err(ExtractionError::InvalidRequest("edited description is empty".into()));
        }
        Ok(req)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attribute {
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub name: String,
    #[serde(default)]
    pub attributes: Vec<Attribute>,
}

/// Garment components and their attributes, as parsed from the edited description.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComponentParse {
    pub components: Vec<Component>,
}

impl ComponentParse {
    pub fn validate(&self) -> Result<(), String> {
        let mut names = HashSet::new();
        for c in &self.components {
            if !names.insert(c.name.trim().to_lowercase()) {
                return Err(format!("duplicate component {:?}", c.name));
            }
            if c.attributes.iter().any(|a| a.key.trim().is_empty()) {
                return Err(format!("component {:?} has an attribute with an empty key", c.name));
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtractionReply {
    sample_id: String,
    #[serde(default)]
    components: ComponentParse,
    questions: Vec<QuestionDoc>,
}

#[derive(Debug, Clone)]
pub struct BuiltGraph {
    pub graph: ValidatedGraph,
    pub components: ComponentParse,
}

pub fn render_extraction_prompt(template: &PromptTemplate, req: &ExtractionRequest) -> Result<String, TemplateError> {
    template.render(&BTreeMap::from([
        ("sample_id", req.sample_id.clone()),
        ("edit_instruction", req.edit_instruction.clone()),
        ("edited_description", req.edited_description.clone()),
    ]))
}

/// Parses and validates an extraction reply for `sample_id`.
pub fn parse_extraction_reply(raw: &str, sample_id: &str, max_questions: usize) -> Result<BuiltGraph, ExtractionError> {
    let violation = |reason: String| ExtractionError::SchemaViolation { reason, raw: raw.to_string() };
    let reply: ExtractionReply = serde_json::from_str(raw.trim()).map_err(|e| violation(e.to_string()))?;
    if reply.sample_id != sample_id {
        return Err(violation(format!("reply is for sample {:?}, expected {sample_id:?}", reply.sample_id)));
    }
    reply.components.validate().map_err(violation)?;
    if reply.questions.is_empty() {
        return Err(ExtractionError::EmptyExtraction { raw: raw.to_string() });
    }
    if reply.questions.len() > max_questions {
        return Err(violation(format!("{} questions exceed the cap of {max_questions}", reply.questions.len())));
    }
    let questions = questions_from_docs(reply.questions, raw).map_err(|e| match e {
        DocumentError::Parse { message, .. } => violation(message),
        DocumentError::Schema(s) => violation(s.to_string()),
    })?;
    let graph = DependencyGraph::new(sample_id, questions).map_err(|e| violation(e.to_string()))?;
    match validate_graph(graph) {
        Ok(graph) => Ok(BuiltGraph { graph, components: reply.components }),
        Err(ScoreError::CategoryViolation(CategoryViolation::NoIcq)) => {
            Err(ExtractionError::EmptyExtraction { raw: raw.to_string() })
        }
        Err(e) => Err(violation(e.to_string())),
    }
}

/// Builds and validates the question graph for one sample.
pub fn build_graph(
    req: &ExtractionRequest,
    template: &PromptTemplate,
    backend: &dyn StructuredTextBackend,
    max_questions: usize,
) -> Result<BuiltGraph, ExtractionError> {
    let prompt = render_extraction_prompt(template, req)?;
    let request = BackendRequest::new(Role::StructuredText, prompt)
        .field("task", "graph")
        .field("sample_id", req.sample_id.as_str())
        .field("edit_instruction", req.edit_instruction.as_str())
        .field("edited_description", req.edited_description.as_str())
        .field("template_version", req.template_version.as_str());
    let raw = backend.generate_text(request)?;
    parse_extraction_reply(&raw, &req.sample_id, max_questions)
}
