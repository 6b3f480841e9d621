use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::backends::{BackendEndpoint, Role};
use crate::digest::ContentDigest;
use crate::extract::DEFAULT_MAX_QUESTIONS;
use crate::score::Weights;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    pub w_icq: Option<f64>,
    pub w_cpq: Option<f64>,
    pub t_decay: Option<f64>,
    pub alpha: Option<f64>,
}

impl WeightsSection {
    /// Missing fields fall back to the defaults (3, 1, 0.3, 0.8).
    pub fn resolve(&self) -> Result<Weights, PipelineError> {
        let d = Weights::default();
        Weights::new(
            self.w_icq.unwrap_or(d.w_icq()),
            self.w_cpq.unwrap_or(d.w_cpq()),
            self.t_decay.unwrap_or(d.t_decay()),
            self.alpha.unwrap_or(d.alpha()),
        )
        .map_err(|e| PipelineError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendsSection {
    #[serde(default = "st_default")]
    pub structured_text: BackendEndpoint,
    #[serde(default = "ie_default")]
    pub image_edit: BackendEndpoint,
    #[serde(default = "vqa_default")]
    pub vqa: BackendEndpoint,
}

fn st_default() -> BackendEndpoint {
    BackendEndpoint::new(Role::StructuredText)
}
fn ie_default() -> BackendEndpoint {
    BackendEndpoint::new(Role::ImageEdit)
}
fn vqa_default() -> BackendEndpoint {
    BackendEndpoint::new(Role::Vqa)
}

impl Default for BackendsSection {
    fn default() -> Self {
        Self { structured_text: st_default(), image_edit: ie_default(), vqa: vqa_default() }
    }
}

impl BackendsSection {
    pub fn endpoints(&self) -> [BackendEndpoint; 3] {
        [self.structured_text.clone(), self.image_edit.clone(), self.vqa.clone()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSection {
    /// Overrides for the built-in templates; absent files keep the built-in text.
    #[serde(default)]
    pub templates_dir: Option<PathBuf>,
    #[serde(default = "one")]
    pub triplets_per_image_per_category: usize,
}

fn one() -> usize {
    1
}

impl Default for SynthesisSection {
    fn default() -> Self {
        Self { templates_dir: None, triplets_per_image_per_category: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub corpus_dir: Option<PathBuf>,
    #[serde(default = "default_max_questions")]
    pub max_questions: usize,
    #[serde(default = "default_top_k")]
    pub top_k_keywords: usize,
}

fn default_workers() -> usize {
    4
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_max_questions() -> usize {
    DEFAULT_MAX_QUESTIONS
}
fn default_top_k() -> usize {
    30
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: default_workers(),
            output_dir: default_output_dir(),
            corpus_dir: None,
            max_questions: default_max_questions(),
            top_k_keywords: default_top_k(),
        }
    }
}

/// Run configuration, read from TOML.
///
/// ```toml
/// [weights]
/// alpha = 0.8
/// [backends.vqa]
/// role = "vqa"
/// base_url = "https://vqa.example/v1"
/// auth_token_env = "VQA_TOKEN"
/// [synthesis]
/// triplets_per_image_per_category = 1
/// [run]
/// seed = 7
/// output_dir = "out"
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub weights: WeightsSection,
    #[serde(default)]
    pub backends: BackendsSection,
    #[serde(default)]
    pub synthesis: SynthesisSection,
    #[serde(default)]
    pub run: RunSection,
}

impl RunConfig {
    /// Parses and validates; relative paths are resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| PipelineError::ConfigParse(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        resolve(&mut cfg.run.output_dir);
        if let Some(p) = cfg.run.corpus_dir.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.synthesis.templates_dir.as_mut() {
            resolve(p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::ConfigParse(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent().unwrap_or_else(|| Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.weights.resolve()?;
        for (section, e, role) in [
            ("structured_text", &self.backends.structured_text, Role::StructuredText),
            ("image_edit", &self.backends.image_edit, Role::ImageEdit),
            ("vqa", &self.backends.vqa, Role::Vqa),
        ] {
            if e.role != role {
                return Err(PipelineError::Config(format!("backends.{section} has role {}", e.role)));
            }
            e.validate().map_err(|err| PipelineError::Config(err.to_string()))?;
        }
        if self.synthesis.triplets_per_image_per_category < 1 {
            return Err(PipelineError::Config("triplets_per_image_per_category must be >= 1".into()));
        }
        if self.run.workers < 1 {
            return Err(PipelineError::Config("workers must be >= 1".into()));
        }
        if self.run.max_questions < 1 {
            return Err(PipelineError::Config("max_questions must be >= 1".into()));
        }
        Ok(())
    }

    pub fn weights(&self) -> Weights {
        self.weights.resolve().expect("validated config")
    }

    /// Digest of the resolved configuration.
    pub fn digest(&self) -> ContentDigest {
        ContentDigest::of(&serde_json::to_vec(self).expect("config serializes"))
    }

    /// Live runs need a URL for every role.
    pub fn require_live_endpoints(&self) -> Result<(), PipelineError> {
        for e in self.backends.endpoints() {
            if e.base_url.is_none() {
                return Err(PipelineError::Config(format!(
                    "backends.{} needs base_url (or use mock fixtures)",
                    e.role
                )));
            }
        }
        Ok(())
    }
}
