use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::record::Manifest;
use super::PipelineError;
use crate::fsutil::write_atomic;
use crate::synthesis::EditCategory;

pub const STATS_TEXT_FILE: &str = "stats.txt";
pub const STATS_JSON_FILE: &str = "stats.json";

const STOP_WORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "has", "have", "in", "into", "is", "it", "its",
    "of", "on", "onto", "or", "so", "that", "the", "their", "them", "then", "there", "these", "this", "those", "to",
    "was", "were", "with", "while", "which", "who", "any", "all", "such",
];

/// Lowercases, replaces punctuation by spaces and drops stop words.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty() && !STOP_WORDS.contains(w))
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryShare {
    pub attempted: usize,
    pub kept: usize,
    /// Share of all attempted records.
    pub attempted_share: f64,
    /// Share of all kept records; 0 when nothing was kept.
    pub kept_share: f64,
    /// kept / attempted within the category.
    pub retention: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub attempted: usize,
    pub kept: usize,
    pub dropped: usize,
    pub parked: usize,
    pub retention: f64,
    pub categories: BTreeMap<EditCategory, CategoryShare>,
    /// Mean word counts of original description, instruction and edited
    /// description over records that have a triplet.
    pub mean_word_counts: Option<[f64; 3]>,
    /// Most frequent instruction keywords, by count then alphabetically.
    pub keywords: Vec<(String, usize)>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_stats(manifest: &Manifest, top_k: usize) -> Result<StatsReport, PipelineError> {
    if manifest.records.is_empty() {
        return Err(PipelineError::EmptyManifest);
    }
    let counters = manifest.counters();
    let attempted: usize = counters.values().map(|c| c.attempted).sum();
    let kept: usize = counters.values().map(|c| c.kept).sum();
    let categories = counters
        .iter()
        .map(|(cat, c)| {
            let share = CategoryShare {
                attempted: c.attempted,
                kept: c.kept,
                attempted_share: ratio(c.attempted, attempted),
                kept_share: ratio(c.kept, kept),
                retention: ratio(c.kept, c.attempted),
            };
            (*cat, share)
        })
        .collect();

    let mut sums = [0usize; 3];
    let mut with_triplet = 0usize;
    let mut freq: HashMap<String, usize> = HashMap::new();
    for t in manifest.records.iter().filter_map(|r| r.triplet.as_ref()) {
        with_triplet += 1;
        for (s, n) in sums.iter_mut().zip(t.word_counts()) {
            *s += n;
        }
        for w in tokenize(&t.edit_instruction) {
            *freq.entry(w).or_default() += 1;
        }
    }
    let mean_word_counts = (with_triplet > 0).then(|| sums.map(|s| ratio(s, with_triplet)));
    let mut keywords: Vec<(String, usize)> = freq.into_iter().collect();
    keywords.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    keywords.truncate(top_k);

    Ok(StatsReport {
        attempted,
        kept,
        dropped: counters.values().map(|c| c.dropped).sum(),
        parked: counters.values().map(|c| c.parked).sum(),
        retention: ratio(kept, attempted),
        categories,
        mean_word_counts,
        keywords,
    })
}

impl StatsReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "attempted {}  kept {}  dropped {}  parked {}",
            self.attempted, self.kept, self.dropped, self.parked
        );
        let _ = writeln!(out, "retention {:.4}", self.retention);
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<22} {:>9} {:>8} {:>6} {:>8} {:>9}",
            "category", "attempted", "share", "kept", "share", "retention"
        );
        for (cat, s) in &self.categories {
            let _ = writeln!(
                out,
                "{:<22} {:>9} {:>7.1}% {:>6} {:>7.1}% {:>9.4}",
                cat.display_name(),
                s.attempted,
                s.attempted_share * 100.0,
                s.kept,
                s.kept_share * 100.0,
                s.retention
            );
        }
        if let Some([o, i, e]) = self.mean_word_counts {
            let _ = writeln!(out);
            let _ = writeln!(out, "mean words: original {o:.2}  instruction {i:.2}  edited {e:.2}");
        }
        if !self.keywords.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(out, "{:<20} {:>6}", "keyword", "count");
            for (w, n) in &self.keywords {
                let _ = writeln!(out, "{w:<20} {n:>6}");
            }
        }
        out
    }

    /// Writes `stats.txt` and `stats.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), PipelineError> {
        let io = |e: std::io::Error| PipelineError::Io(e.to_string());
        write_atomic(&dir.join(STATS_TEXT_FILE), self.to_text().as_bytes()).map_err(io)?;
        write_atomic(&dir.join(STATS_JSON_FILE), &serde_json::to_vec_pretty(self).expect("stats serialize")).map_err(io)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digest::ContentDigest;
    use crate::pipeline::{SampleRecord, Stage};
    use crate::score::Decision;
    use crate::synthesis::{ImageRef, TextTriplet};

    fn image() -> ImageRef {
        ImageRef {
            id: "img-000000000000".into(),
            location: "images/00/x.png".into(),
            width: 512,
            height: 512,
            sha256: ContentDigest::of(b"x"),
        }
    }

    fn scored(i: usize, category: EditCategory, decision: Decision) -> SampleRecord {
        let mut r = SampleRecord::new(format!("s{i}"), image(), category, 0);
        r.stage = Stage::Scored;
        r.score = Some(0.0);
        r.decision = Some(decision);
        r
    }

    fn manifest(records: Vec<SampleRecord>) -> Manifest {
        let mut m = Manifest::new(ContentDigest::of(b"cfg"), 0);
        m.records = records;
        m
    }

    #[test]
    fn empty_manifest_is_an_error() {
        assert!(matches!(compute_stats(&manifest(vec![]), 30), Err(PipelineError::EmptyManifest)));
    }

    #[test]
    fn single_record_has_full_share() {
        let s = compute_stats(&manifest(vec![scored(0, EditCategory::ColorAlteration, Decision::Keep)]), 30).unwrap();
        assert_eq!(s.categories.len(), 1);
        assert_eq!(s.categories[&EditCategory::ColorAlteration].attempted_share, 1.0);
        assert_eq!(s.retention, 1.0);
        assert!(s.mean_word_counts.is_none());
    }

    #[test]
    fn shares_and_retention() {
        let mut records = Vec::new();
        for i in 0..10 {
            let cat = if i < 4 { EditCategory::ObjectRemoval } else { EditCategory::MaterialReplacement };
            let d = if i % 2 == 0 { Decision::Keep } else { Decision::Drop };
            records.push(scored(i, cat, d));
        }
        records.push(SampleRecord::new("pending".into(), image(), EditCategory::ObjectAddition, 0));
        let s = compute_stats(&manifest(records), 30).unwrap();
        assert_eq!((s.attempted, s.kept, s.dropped, s.parked), (11, 5, 5, 0));
        assert_eq!(s.categories[&EditCategory::ObjectRemoval].attempted, 4);
        assert_eq!(s.categories[&EditCategory::ObjectRemoval].kept_share, 2.0 / 5.0);
        assert_eq!(s.retention, 5.0 / 11.0);
        let text = s.to_text();
        assert!(text.contains("Object Removal"));
        assert!(text.contains("retention 0.4545"));
    }

    #[test]
    fn keywords_and_word_counts() {
        let mut records = Vec::new();
        for (i, instr) in
            ["Change the color of the sweater to blue.", "Change the sleeves to lace", "Remove the pocket"]
                .iter()
                .enumerate()
        {
            let mut r = scored(i, EditCategory::ColorAlteration, Decision::Keep);
            r.triplet = Some(
                TextTriplet::new("A gray sweater", instr, "A blue sweater", EditCategory::ColorAlteration).unwrap(),
            );
            records.push(r);
        }
        let s = compute_stats(&manifest(records), 2).unwrap();
        assert_eq!(s.keywords, vec![("change".to_string(), 2), ("blue".to_string(), 1)]);
        let [o, i, e] = s.mean_word_counts.unwrap();
        assert_eq!((o, e), (3.0, 3.0));
        assert!((i - 16.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn tokenizer() {
        assert_eq!(
            tokenize("Replace the Denim-jacket's buttons, with gold!"),
            ["replace", "denim", "jacket", "s", "buttons", "gold"]
        );
    }

    #[test]
    fn report_files() {
        let dir = tempfile::tempdir().unwrap();
        let s = compute_stats(&manifest(vec![scored(0, EditCategory::ColorAlteration, Decision::Drop)]), 5).unwrap();
        s.write(dir.path()).unwrap();
        let back: StatsReport =
            serde_json::from_slice(&std::fs::read(dir.path().join(STATS_JSON_FILE)).unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(dir.path().join(STATS_TEXT_FILE).is_file());
    }
}
