use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::backends::VqaVerdict;
use crate::digest::ContentDigest;
use crate::fsutil::write_atomic;
use crate::score::{filter_decision, AnswerSet, Decision, DependencyGraph, ScoreReport, Weights};
use crate::synthesis::{EditCategory, ImageRef, TextTriplet};

/// Last completed stage of a sample. `Pending` means not even the triplet exists yet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Pending,
    Synthesized,
    ImageEdited,
    GraphBuilt,
    Answered,
    Scored,
}

impl Stage {
    pub fn next(self) -> Option<Stage> {
        use Stage::*;
        match self {
            Pending => Some(Synthesized),
            Synthesized => Some(ImageEdited),
            ImageEdited => Some(GraphBuilt),
            GraphBuilt => Some(Answered),
            Answered => Some(Scored),
            Scored => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Failure {
    /// The stage that was being attempted.
    pub stage: Stage,
    pub error: String,
    /// Unix seconds.
    pub timestamp: u64,
    /// Rejected backend reply, kept for audit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_reply: Option<String>,
}

/// Full provenance of one candidate edit. One manifest line each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub sample_id: String,
    pub category: EditCategory,
    pub stage: Stage,
    pub score: Option<f64>,
    pub decision: Option<Decision>,
    pub round: usize,
    pub original_image: ImageRef,
    pub triplet: Option<TextTriplet>,
    pub edited_image: Option<ImageRef>,
    pub graph: Option<DependencyGraph>,
    pub answers: Option<AnswerSet>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vqa_replies: Vec<VqaVerdict>,
    pub report: Option<ScoreReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<Failure>,
}

impl SampleRecord {
    pub fn new(sample_id: String, original_image: ImageRef, category: EditCategory, round: usize) -> Self {
        Self {
            sample_id,
            category,
            stage: Stage::Pending,
            score: None,
            decision: None,
            round,
            original_image,
            triplet: None,
            edited_image: None,
            graph: None,
            answers: None,
            vqa_replies: Vec::new(),
            report: None,
            failures: Vec::new(),
        }
    }

    pub fn set_report(&mut self, report: ScoreReport) {
        self.score = Some(report.score);
        self.decision = Some(report.decision);
        self.report = Some(report);
        self.stage = Stage::Scored;
    }

    /// Stopped short of scoring because of a recorded failure.
    pub fn is_parked(&self) -> bool {
        self.stage < Stage::Scored && !self.failures.is_empty()
    }

    /// Each stage implies every artifact up to it.
    pub fn check(&self) -> Result<(), String> {
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(format!("{}: stage {:?} without {what}", self.sample_id, self.stage))
            }
        };
        if self.stage >= Stage::Synthesized {
            need(self.triplet.is_some(), "triplet")?;
        }
        if self.stage >= Stage::ImageEdited {
            need(self.edited_image.is_some(), "edited image")?;
        }
        if self.stage >= Stage::GraphBuilt {
            need(self.graph.is_some(), "graph")?;
        }
        if self.stage >= Stage::Answered {
            need(self.answers.is_some(), "answers")?;
        }
        if self.stage == Stage::Scored {
            need(self.report.is_some() && self.decision.is_some() && self.score.is_some(), "report and decision")?;
            let report = self.report.as_ref().unwrap();
            need(
                self.score == Some(report.score) && self.decision == Some(report.decision),
                "consistent score fields",
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounters {
    pub attempted: usize,
    pub kept: usize,
    pub dropped: usize,
    /// Stopped by a failure.
    pub parked: usize,
    /// Not yet advanced to scoring (stage-limited runs only).
    pub pending: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub records: Vec<SampleRecord>,
    pub run_config_digest: ContentDigest,
    pub seed: u64,
}

impl Manifest {
    pub fn new(run_config_digest: ContentDigest, seed: u64) -> Self {
        Self { records: Vec::new(), run_config_digest, seed }
    }

    pub fn push(&mut self, record: SampleRecord) {
        self.records.push(record);
    }

    /// Per-category counters, recomputed from the records.
    pub fn counters(&self) -> BTreeMap<EditCategory, CategoryCounters> {
        let mut out: BTreeMap<EditCategory, CategoryCounters> = BTreeMap::new();
        for r in &self.records {
            let c = out.entry(r.category).or_default();
            c.attempted += 1;
            match (r.stage, r.decision) {
                (Stage::Scored, Some(Decision::Keep)) => c.kept += 1,
                (Stage::Scored, _) => c.dropped += 1,
                _ if r.is_parked() => c.parked += 1,
                _ => c.pending += 1,
            }
        }
        out
    }

    pub fn kept(&self) -> impl Iterator<Item = &SampleRecord> {
        self.records.iter().filter(|r| r.stage == Stage::Scored && r.decision == Some(Decision::Keep))
    }

    /// Newline-delimited JSON, one record per line.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn records_from_ndjson(text: &str) -> Result<Vec<SampleRecord>, PipelineError> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| PipelineError::Manifest(format!("line {}: {e}", i + 1))))
            .collect()
    }

    pub fn digest(&self) -> ContentDigest {
        ContentDigest::of(self.to_ndjson().as_bytes())
    }

    /// Writes `manifest.jsonl` and `manifest_meta.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), PipelineError> {
        let io = |e: std::io::Error| PipelineError::Io(e.to_string());
        write_atomic(&dir.join(MANIFEST_FILE), self.to_ndjson().as_bytes()).map_err(io)?;
        let meta = ManifestMeta {
            run_config_digest: self.run_config_digest.clone(),
            seed: self.seed,
            manifest_digest: self.digest(),
            counters: self.counters(),
        };
        write_atomic(&dir.join(MANIFEST_META_FILE), &serde_json::to_vec_pretty(&meta).expect("meta serializes"))
            .map_err(io)
    }

    pub fn read(dir: &Path) -> Result<Self, PipelineError> {
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name))
                .map_err(|e| PipelineError::Manifest(format!("{}: {e}", dir.join(name).display())))
        };
        let meta: ManifestMeta =
            serde_json::from_str(&read(MANIFEST_META_FILE)?).map_err(|e| PipelineError::Manifest(e.to_string()))?;
        let records = Self::records_from_ndjson(&read(MANIFEST_FILE)?)?;
        Ok(Self { records, run_config_digest: meta.run_config_digest, seed: meta.seed })
    }

    /// Re-derives every decision from the stored score under `weights`.
    pub fn refilter(&mut self, weights: &Weights) {
        for r in &mut self.records {
            if let Some(report) = r.report.as_mut() {
                report.decision = filter_decision(report.score, weights);
                r.decision = Some(report.decision);
            }
        }
    }

    /// Sample ids whose stored decision disagrees with their stored score under `weights`.
    pub fn inconsistent_decisions(&self, weights: &Weights) -> Vec<&str> {
        self.records
            .iter()
            .filter(|r| match (&r.report, r.decision) {
                (Some(rep), Some(d)) => filter_decision(rep.score, weights) != d || rep.decision != d,
                (None, None) => false,
                _ => true,
            })
            .map(|r| r.sample_id.as_str())
            .collect()
    }
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const MANIFEST_META_FILE: &str = "manifest_meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestMeta {
    run_config_digest: ContentDigest,
    seed: u64,
    manifest_digest: ContentDigest,
    counters: BTreeMap<EditCategory, CategoryCounters>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{edit_score, validate_graph, Question, QuestionCategory};

    fn image() -> ImageRef {
        ImageRef {
            id: "img-abc".into(),
            location: "images/ab/abc.png".into(),
            width: 512,
            height: 640,
            sha256: ContentDigest::of(b"abc"),
        }
    }

    fn scored_record(answer: crate::score::Verdict) -> SampleRecord {
        let mut r = SampleRecord::new("img-abc-color_alteration-0".into(), image(), EditCategory::ColorAlteration, 0);
        r.triplet = Some(
            TextTriplet::new(
                "A gray sweater",
                "Make the sweater blue",
                "A blue sweater",
                EditCategory::ColorAlteration,
            )
            .unwrap(),
        );
        r.edited_image = Some(image());
        let graph = DependencyGraph::new(
            r.sample_id.clone(),
            vec![
                Question::root("q1", "Is the sweater blue?", QuestionCategory::Icq).unwrap(),
                Question::root("c1", "Is the background unchanged?", QuestionCategory::Cpq).unwrap(),
            ],
        )
        .unwrap();
        let answers = AnswerSet::uniform(&graph, answer);
        let report = edit_score(&validate_graph(graph.clone()).unwrap(), &answers, &Weights::default()).unwrap();
        r.graph = Some(graph);
        r.answers = Some(answers);
        r.set_report(report);
        r
    }

    #[test]
    fn stage_invariant() {
        let mut r = SampleRecord::new("s".into(), image(), EditCategory::ObjectRemoval, 0);
        assert!(r.check().is_ok());
        r.stage = Stage::ImageEdited;
        assert!(r.check().unwrap_err().contains("triplet"));
        assert!(scored_record(crate::score::Verdict::Yes).check().is_ok());
        let mut bad = scored_record(crate::score::Verdict::Yes);
        bad.score = Some(0.1);
        assert!(bad.check().is_err());
    }

    #[test]
    fn ndjson_round_trip_and_field_names() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new(ContentDigest::of(b"cfg"), 7);
        m.push(scored_record(crate::score::Verdict::Yes));
        let mut parked = SampleRecord::new("p".into(), image(), EditCategory::ObjectAddition, 0);
        parked.failures.push(Failure {
            stage: Stage::Synthesized,
            error: "boom".into(),
            timestamp: 1,
            raw_reply: Some("{".into()),
        });
        m.push(parked);
        m.write(dir.path()).unwrap();
        let back = Manifest::read(dir.path()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.digest(), m.digest());
        let first: serde_json::Value = serde_json::from_str(m.to_ndjson().lines().next().unwrap()).unwrap();
        for key in ["sample_id", "category", "stage", "score", "decision"] {
            assert!(first.get(key).is_some(), "{key}");
        }
        assert_eq!(first["decision"], "Keep");
        assert_eq!(first["stage"], "scored");
    }

    #[test]
    fn counters_conserve() {
        let mut m = Manifest::new(ContentDigest::of(b"cfg"), 0);
        m.push(scored_record(crate::score::Verdict::Yes));
        m.push(scored_record(crate::score::Verdict::No));
        let mut parked = SampleRecord::new("p".into(), image(), EditCategory::ColorAlteration, 1);
        parked.failures.push(Failure { stage: Stage::Synthesized, error: "x".into(), timestamp: 0, raw_reply: None });
        m.push(parked);
        let c = m.counters()[&EditCategory::ColorAlteration];
        assert_eq!(c, CategoryCounters { attempted: 3, kept: 1, dropped: 1, parked: 1, pending: 0 });
        assert_eq!(m.kept().count(), 1);
    }

    #[test]
    fn refilter_follows_alpha() {
        let mut m = Manifest::new(ContentDigest::of(b"cfg"), 0);
        m.push(scored_record(crate::score::Verdict::Yes));
        assert!(m.inconsistent_decisions(&Weights::default()).is_empty());
        let strict = Weights::default().with_alpha(1.0).unwrap();
        assert!(m.inconsistent_decisions(&strict).is_empty());
        let mut all_no = Manifest::new(ContentDigest::of(b"cfg"), 0);
        all_no.push(scored_record(crate::score::Verdict::No));
        let lax = Weights::default().with_alpha(0.0).unwrap();
        assert_eq!(all_no.inconsistent_decisions(&lax), vec!["img-abc-color_alteration-0"]);
        all_no.refilter(&lax);
        assert_eq!(all_no.records[0].decision, Some(Decision::Keep));
        assert!(all_no.inconsistent_decisions(&lax).is_empty());
    }
}
