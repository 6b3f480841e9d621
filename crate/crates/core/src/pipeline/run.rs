use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::record::{CategoryCounters, Failure, Manifest, SampleRecord, Stage};
use super::{PipelineError, RunConfig};
use crate::backends::{BackendError, BackendStack, Clock, ImagePayload, Role, Transport, VqaBackend, VqaVerdict};
use crate::cache::{stage_key, ArtifactCache};
use crate::digest::ContentDigest;
use crate::extract::{build_graph, ExtractionError, ExtractionRequest};
use crate::fsutil::write_atomic;
use crate::score::{edit_score, validate_graph, AnswerSet, DependencyGraph, QuestionId, ValidatedGraph, Weights};
use crate::synthesis::{
    generate_edited_image, generate_triplet, round_robin, EditCategory, ImageRef, ImageStore, SynthesisError,
    SynthesisTask, TemplateSet, TextTriplet,
};

pub const RUN_SUMMARY_FILE: &str = "run_summary.json";
pub const TRANSCRIPT_FILE: &str = "mock_transcript.jsonl";
const PARTIAL_MANIFEST_FILE: &str = "manifest.partial.jsonl";
const EDIT_VERSION: &str = "edit-v1";
const VQA_VERSION: &str = "vqa-v1";

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// Image files directly inside `dir`, sorted by path.
pub fn load_corpus(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let entries = std::fs::read_dir(dir).map_err(|e| PipelineError::Corpus(format!("{}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| PipelineError::Corpus(e.to_string()))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            out.push(path);
        }
    }
    if out.is_empty() {
        return Err(PipelineError::CorpusEmpty(dir.to_path_buf()));
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub until: Stage,
    pub records: usize,
    pub counters: std::collections::BTreeMap<EditCategory, CategoryCounters>,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub backend_attempts: u64,
    pub manifest_digest: ContentDigest,
    pub run_config_digest: ContentDigest,
    pub seed: u64,
    pub cancelled: bool,
}

/// Asks every graph question about `edited`, at most `max_concurrency` at a time.
/// Replies come back in graph order. Any failure aborts the whole set.
pub fn answer_questions(
    graph: &ValidatedGraph,
    edited: &ImagePayload,
    edited_digest: &ContentDigest,
    vqa: &dyn VqaBackend,
    cache: Option<&ArtifactCache>,
    max_concurrency: usize,
) -> Result<Vec<VqaVerdict>, (QuestionId, BackendError)> {
    let questions = graph.graph().questions();
    let slots: Vec<Mutex<Option<Result<String, BackendError>>>> = questions.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    std::thread::scope(|s| {
        for _ in 0..max_concurrency.clamp(1, questions.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= questions.len() || failed.load(Ordering::SeqCst) {
                    break;
                }
                let q = &questions[i];
                let key = stage_key(
                    "vqa",
                    [edited_digest.as_str(), q.id().as_str(), q.text(), q.category().as_str()],
                    VQA_VERSION,
                    Role::Vqa.as_str(),
                );
                let reply = match cache.and_then(|c| c.get::<String>(&key)) {
                    Some(hit) => Ok(hit),
                    None => vqa.ask(edited, q).inspect(|raw| {
                        if let Some(c) = cache {
                            if let Err(e) = c.put(&key, raw) {
                                log::warn!("cache write failed: {e}");
                            }
                        }
                    }),
                };
                if reply.is_err() {
                    failed.store(true, Ordering::SeqCst);
                }
                *slots[i].lock().unwrap() = Some(reply);
            });
        }
    });
    let mut out = Vec::with_capacity(questions.len());
    for (q, slot) in questions.iter().zip(slots) {
        match slot.into_inner().unwrap() {
            Some(Ok(raw)) => out.push(VqaVerdict::from_reply(q.id().clone(), raw)),
            Some(Err(e)) => return Err((q.id().clone(), e)),
            None => {}
        }
    }
    assert_eq!(out.len(), questions.len(), "unanswered question without a recorded failure");
    Ok(out)
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn failure(stage: Stage, error: impl ToString, raw_reply: Option<&str>) -> Failure {
    Failure { stage, error: error.to_string(), timestamp: now_secs(), raw_reply: raw_reply.map(str::to_owned) }
}

pub struct Pipeline {
    config: RunConfig,
    weights: Weights,
    backends: BackendStack,
    templates: TemplateSet,
    store: ImageStore,
    cache: ArtifactCache,
    cancel: Arc<AtomicBool>,
}

impl Pipeline {
    pub fn new(config: RunConfig, transport: Arc<dyn Transport>, clock: Arc<dyn Clock>) -> Result<Self, PipelineError> {
        config.validate()?;
        let templates = match &config.synthesis.templates_dir {
            Some(dir) => TemplateSet::load(dir)?,
            None => TemplateSet::default(),
        };
        let out = config.run.output_dir.clone();
        Ok(Self {
            weights: config.weights(),
            backends: BackendStack::new(config.backends.endpoints(), transport, clock, config.run.seed),
            templates,
            store: ImageStore::new(&out),
            cache: ArtifactCache::new(out.join("cache")),
            cancel: Arc::new(AtomicBool::new(false)),
            config,
        })
    }

    /// Shared flag; setting it stops the run after in-flight stages finish.
    pub fn cancel_flag(&self) -> Arc<AtomicBool> {
        self.cancel.clone()
    }

    pub fn with_cancel_flag(mut self, flag: Arc<AtomicBool>) -> Self {
        self.cancel = flag;
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn output_dir(&self) -> &Path {
        &self.config.run.output_dir
    }

    pub fn cache(&self) -> &ArtifactCache {
        &self.cache
    }

    pub fn backends(&self) -> &BackendStack {
        &self.backends
    }

    fn cancelled(&self) -> bool {
        self.cancel.load(Ordering::SeqCst)
    }

    /// Copies corpus images into the content-addressed store.
    pub fn ingest(&self, images: &[PathBuf]) -> Result<Vec<ImageRef>, PipelineError> {
        if images.is_empty() {
            return Err(PipelineError::CorpusEmpty(self.config.run.corpus_dir.clone().unwrap_or_default()));
        }
        images
            .iter()
            .map(|p| self.store.ingest(p).map_err(|e| PipelineError::Corpus(format!("{}: {e}", p.display()))))
            .collect()
    }

    /// Advances every (image, category, round) task up to `until`, then writes
    /// `manifest.jsonl`, `manifest_meta.json` and `run_summary.json`.
    pub fn run(&self, images: &[PathBuf], until: Stage) -> Result<(Manifest, RunSummary), PipelineError> {
        let originals = self.ingest(images)?;
        let tasks = round_robin(originals.len(), self.config.synthesis.triplets_per_image_per_category);
        log::info!("{} images, {} tasks, stopping after {:?}", originals.len(), tasks.len(), until);

        let out_dir = self.output_dir();
        std::fs::create_dir_all(out_dir).map_err(|e| PipelineError::Io(e.to_string()))?;
        let results: Vec<Mutex<Option<SampleRecord>>> = tasks.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel::<SampleRecord>();

        std::thread::scope(|s| -> Result<(), PipelineError> {
            for _ in 0..self.config.run.workers {
                let tx = tx.clone();
                let (tasks, originals, results, next) = (&tasks, &originals, &results, &next);
                s.spawn(move || loop {
                    if self.cancelled() {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(task) = tasks.get(i) else { break };
                    let record = self.process(&originals[task.image_index], task, until);
                    let _ = tx.send(record.clone());
                    *results[i].lock().unwrap() = Some(record);
                });
            }
            drop(tx);
            // single writer: append completed records as they arrive
            let partial = out_dir.join(PARTIAL_MANIFEST_FILE);
            let mut file = std::fs::File::create(&partial).map_err(|e| PipelineError::Io(e.to_string()))?;
            for record in rx {
                use std::io::Write;
                log::info!("{}: {:?}", record.sample_id, record.stage);
                let line = serde_json::to_string(&record).expect("record serializes");
                writeln!(file, "{line}").map_err(|e| PipelineError::Io(e.to_string()))?;
            }
            Ok(())
        })?;

        let mut manifest = Manifest::new(self.config.digest(), self.config.run.seed);
        for (task, slot) in tasks.iter().zip(results) {
            let record = slot.into_inner().unwrap().unwrap_or_else(|| {
                let image = &originals[task.image_index];
                SampleRecord::new(sample_id(image, task), image.clone(), task.category, task.round)
            });
            debug_assert!(record.check().is_ok(), "{:?}", record.check());
            manifest.push(record);
        }
        manifest.write(out_dir)?;
        let _ = std::fs::remove_file(out_dir.join(PARTIAL_MANIFEST_FILE));

        let summary = RunSummary {
            until,
            records: manifest.records.len(),
            counters: manifest.counters(),
            cache_hits: self.cache.hits(),
            cache_misses: self.cache.misses(),
            backend_attempts: self.backends.attempts_issued(),
            manifest_digest: manifest.digest(),
            run_config_digest: manifest.run_config_digest.clone(),
            seed: manifest.seed,
            cancelled: self.cancelled(),
        };
        write_atomic(
            &out_dir.join(RUN_SUMMARY_FILE),
            &serde_json::to_vec_pretty(&summary).expect("summary serializes"),
        )
        .map_err(|e| PipelineError::Io(e.to_string()))?;
        log::info!(
            "done: {} records, {} cache hits, {} backend attempts",
            summary.records,
            summary.cache_hits,
            summary.backend_attempts
        );
        Ok((manifest, summary))
    }

    /// Runs one task through the stages, parking it at the first failure.
    fn process(&self, original: &ImageRef, task: &SynthesisTask, until: Stage) -> SampleRecord {
        let mut record = SampleRecord::new(sample_id(original, task), original.clone(), task.category, task.round);
        while let Some(next) = record.stage.next() {
            if next > until || self.cancelled() {
                break;
            }
            match self.advance(&mut record, next) {
                Ok(()) => record.stage = next,
                Err(f) => {
                    log::warn!("{} parked before {:?}: {}", record.sample_id, next, f.error);
                    record.failures.push(f);
                    break;
                }
            }
        }
        record
    }

    fn advance(&self, record: &mut SampleRecord, stage: Stage) -> Result<(), Failure> {
        match stage {
            Stage::Pending => Ok(()),
            Stage::Synthesized => {
                record.triplet = Some(self.triplet(&record.original_image, record.category, record.round)?);
                Ok(())
            }
            Stage::ImageEdited => {
                let triplet = record.triplet.as_ref().expect("stage order");
                let (edited, _) = generate_edited_image(
                    &record.original_image,
                    triplet,
                    EDIT_VERSION,
                    &self.store,
                    &self.cache,
                    self.backends.image_edit.as_ref(),
                )
                .map_err(|e| synthesis_failure(stage, e))?;
                record.edited_image = Some(edited);
                Ok(())
            }
            Stage::GraphBuilt => {
                let graph = self.graph(record)?;
                record.graph = Some(graph.into_graph());
                Ok(())
            }
            Stage::Answered => {
                let graph = record.graph.clone().expect("stage order");
                let validated = validate_graph(graph).map_err(|e| failure(stage, e, None))?;
                let edited = record.edited_image.as_ref().expect("stage order");
                let payload = self.store.payload(edited).map_err(|e| failure(stage, e, None))?;
                let verdicts = answer_questions(
                    &validated,
                    &payload,
                    &edited.sha256,
                    self.backends.vqa.as_ref(),
                    Some(&self.cache),
                    self.config.backends.vqa.max_concurrency,
                )
                .map_err(|(qid, e)| failure(stage, format!("question {qid}: {e}"), None))?;
                record.answers =
                    Some(verdicts.iter().map(|v| (v.question_id.clone(), v.verdict)).collect::<AnswerSet>());
                record.vqa_replies = verdicts;
                Ok(())
            }
            Stage::Scored => {
                let validated =
                    validate_graph(record.graph.clone().expect("stage order")).map_err(|e| failure(stage, e, None))?;
                let answers = record.answers.as_ref().expect("stage order");
                let report = edit_score(&validated, answers, &self.weights).map_err(|e| failure(stage, e, None))?;
                record.set_report(report);
                Ok(())
            }
        }
    }

    fn triplet(&self, image: &ImageRef, category: EditCategory, round: usize) -> Result<TextTriplet, Failure> {
        let template = self.templates.category(category);
        let round_text = round.to_string();
        let key = stage_key(
            "triplet",
            [image.sha256.as_str(), category.snake_case(), round_text.as_str()],
            template.version(),
            Role::StructuredText.as_str(),
        );
        if let Some(hit) = self.cache.get::<TextTriplet>(&key) {
            return Ok(hit);
        }
        let triplet =
            generate_triplet(image, &self.store, category, round, template, self.backends.structured_text.as_ref())
                .map_err(|e| synthesis_failure(Stage::Synthesized, e))?;
        self.cache.put(&key, &triplet).map_err(|e| failure(Stage::Synthesized, e, None))?;
        Ok(triplet)
    }

    fn graph(&self, record: &SampleRecord) -> Result<ValidatedGraph, Failure> {
        let stage = Stage::GraphBuilt;
        let triplet = record.triplet.as_ref().expect("stage order");
        let template = self.templates.extraction();
        let key = stage_key(
            "graph",
            [record.sample_id.as_str(), triplet.edit_instruction.as_str(), triplet.edited_description.as_str()],
            template.version(),
            Role::StructuredText.as_str(),
        );
        if let Some(hit) = self.cache.get::<DependencyGraph>(&key) {
            if let Ok(v) = validate_graph(hit) {
                return Ok(v);
            }
        }
        let req = ExtractionRequest::new(
            record.sample_id.as_str(),
            triplet.edit_instruction.as_str(),
            triplet.edited_description.as_str(),
            template.version(),
        )
        .map_err(|e| failure(stage, e, None))?;
        let built = build_graph(&req, template, self.backends.structured_text.as_ref(), self.config.run.max_questions)
            .map_err(|e: ExtractionError| failure(stage, &e, e.raw_reply()))?;
        self.cache.put(&key, built.graph.graph()).map_err(|e| failure(stage, e, None))?;
        Ok(built.graph)
    }
}

fn synthesis_failure(stage: Stage, e: SynthesisError) -> Failure {
    let raw = match &e {
        SynthesisError::SchemaViolation { raw, .. } => Some(raw.as_str()),
        _ => None,
    };
    failure(stage, &e, raw)
}

fn sample_id(image: &ImageRef, task: &SynthesisTask) -> String {
    format!("{}-{}-{}", image.id, task.category.snake_case(), task.round)
}
