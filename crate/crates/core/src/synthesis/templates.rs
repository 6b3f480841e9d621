use std::collections::BTreeMap;
use std::path::Path;

use super::EditCategory;
use crate::template::{PromptTemplate, TemplateError};

const BUILTIN: [(EditCategory, &str); 6] = [
    (EditCategory::ObjectRemoval, include_str!("../../templates/object_removal.txt")),
    (EditCategory::ObjectReplacement, include_str!("../../templates/object_replacement.txt")),
    (EditCategory::ObjectAddition, include_str!("../../templates/object_addition.txt")),
    (EditCategory::MaterialReplacement, include_str!("../../templates/material_replacement.txt")),
    (EditCategory::ColorAlteration, include_str!("../../templates/color_alteration.txt")),
    (EditCategory::StructuralAlteration, include_str!("../../templates/structural_alteration.txt")),
];

const BUILTIN_EXTRACTION: &str = include_str!("../../templates/extraction.txt");

pub const EXTRACTION_TEMPLATE: &str = "extraction";

/// One proposal template per edit category plus the graph extraction template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    categories: BTreeMap<EditCategory, PromptTemplate>,
    extraction: PromptTemplate,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self {
            categories: BUILTIN.iter().map(|(c, t)| (*c, PromptTemplate::new(c.snake_case(), *t))).collect(),
            extraction: PromptTemplate::new(EXTRACTION_TEMPLATE, BUILTIN_EXTRACTION),
        }
    }
}

impl TemplateSet {
    /// Loads `<dir>/<category_snake_case>.txt` and `<dir>/extraction.txt`,
    /// keeping the built-in text for any file that is absent.
    pub fn load(dir: &Path) -> Result<Self, TemplateError> {
        if !dir.is_dir() {
            return Err(TemplateError::Io { path: dir.display().to_string(), message: "not a directory".into() });
        }
        let mut set = Self::default();
        for c in EditCategory::ALL {
            let path = dir.join(format!("{}.txt", c.snake_case()));
            if path.is_file() {
                set.categories.insert(c, PromptTemplate::load(c.snake_case(), &path)?);
            }
        }
        let path = dir.join(format!("{EXTRACTION_TEMPLATE}.txt"));
        if path.is_file() {
            set.extraction = PromptTemplate::load(EXTRACTION_TEMPLATE, &path)?;
        }
        Ok(set)
    }

    pub fn category(&self, c: EditCategory) -> &PromptTemplate {
        &self.categories[&c]
    }

    pub fn extraction(&self) -> &PromptTemplate {
        &self.extraction
    }

    /// Writes every template into `dir` (used to seed an editable copy).
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (c, t) in &self.categories {
            std::fs::write(dir.join(format!("{}.txt", c.snake_case())), t.content())?;
        }
        std::fs::write(dir.join(format!("{EXTRACTION_TEMPLATE}.txt")), self.extraction.content())
    }
}
