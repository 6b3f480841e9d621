//! End-to-end orchestration: synthesize, edit, build graph, answer, score, filter.

mod config;
mod record;
mod run;
mod stats;

use std::path::PathBuf;

use thiserror::Error;

use crate::template::TemplateError;

pub use config::{BackendsSection, RunConfig, RunSection, SynthesisSection, WeightsSection};
pub use record::{CategoryCounters, Failure, Manifest, SampleRecord, Stage, MANIFEST_FILE, MANIFEST_META_FILE};
pub use run::{answer_questions, load_corpus, Pipeline, RunSummary, RUN_SUMMARY_FILE, TRANSCRIPT_FILE};
pub use stats::{compute_stats, tokenize, CategoryShare, StatsReport, STATS_JSON_FILE, STATS_TEXT_FILE};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot read configuration: {0}")]
    ConfigParse(String),
    #[error("corpus {} contains no images", .0.display())]
    CorpusEmpty(PathBuf),
    #[error("corpus: {0}")]
    Corpus(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("manifest has no records")]
    EmptyManifest,
    #[error("i/o: {0}")]
    Io(String),
}
