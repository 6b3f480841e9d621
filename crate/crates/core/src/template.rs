//! Prompt templates with named `{slot}` placeholders.
//!
//! A slot is `{` + identifier (`[A-Za-z_][A-Za-z0-9_]*`) + `}`. `{{` renders a
//! literal `{`. Any other brace is copied through, so JSON examples can be
//! written into templates without escaping.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::digest::ContentDigest;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template {template}: no value bound for slot {{{slot}}}")]
    MissingSlot { template: String, slot: String },
    #[error("cannot read template {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    name: String,
    content: String,
    version: String,
}

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn pieces(content: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut rest = content;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        if let Some(tail) = after.strip_prefix('{') {
            out.push(Piece::Text(&rest[..open + 1]));
            rest = tail;
            continue;
        }
        match after.find('}') {
            Some(close) if is_ident(&after[..close]) => {
                out.push(Piece::Text(&rest[..open]));
                out.push(Piece::Slot(&after[..close]));
                rest = &after[close + 1..];
            }
            _ => {
                out.push(Piece::Text(&rest[..open + 1]));
                rest = after;
            }
        }
    }
    out.push(Piece::Text(rest));
    out
}

impl PromptTemplate {
    /// The version is derived from the content, so editing a template
    /// changes every cache key that includes it.
    pub fn new(name: impl Into<String>, content: impl Into<String>) -> Self {
        let content = content.into();
        let version = ContentDigest::of(content.as_bytes()).as_str()[..16].to_string();
        Self { name: name.into(), content, version }
    }

    pub fn load(name: impl Into<String>, path: &std::path::Path) -> Result<Self, TemplateError> {
        let content = std::fs::read_to_string(path)
            .map_err(|e| TemplateError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Ok(Self::new(name, content))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn content(&self) -> &str {
        &self.content
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    /// Slot names in order of first appearance.
    pub fn slots(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for p in pieces(&self.content) {
            if let Piece::Slot(s) = p {
                if !seen.contains(&s) {
                    seen.push(s);
                }
            }
        }
        seen
    }

    pub fn render(&self, bindings: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.content.len());
        for p in pieces(&self.content) {
            match p {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(s) => match bindings.get(s) {
                    Some(v) => out.push_str(v),
                    None => {
                        return Err(TemplateError::MissingSlot { template: self.name.clone(), slot: s.to_string() })
                    }
                },
            }
        }
        Ok(out)
    }
}
