//! Deterministic offline backend.
//!
//! A request is answered, in order of preference, by a test override, by a
//! canned fixture file named after the request digest (`<digest>.txt` for
//! text, `<digest>.png` for images), or by a generator seeded from the run
//! seed and the request digest. Identical requests therefore always get
//! identical replies regardless of scheduling.

use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{BackendEndpoint, BackendReply, BackendRequest, ImagePayload, Role, Transport, TransportError};
use crate::digest::ContentDigest;
use crate::synthesis::EditCategory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VqaPolicy {
    AllYes,
    AllNo,
    /// Yes to ICQs, No to everything else.
    IcqOnly,
    /// Yes with probability `p_yes`.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphShape {
    /// One ICQ, an IDQ chain of two, two CPQs.
    Full,
    /// One ICQ and one CPQ.
    IcqCpq,
}

/// Generator settings, read from `mock.toml` in the fixtures directory when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MockConfig {
    pub vqa: VqaPolicy,
    pub p_yes: f64,
    pub graph_shape: GraphShape,
    pub image_size: u32,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self { vqa: VqaPolicy::Random, p_yes: 0.9, graph_shape: GraphShape::Full, image_size: 512 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub role: Role,
    pub request_digest: String,
    pub source: String,
}

type Override = Box<dyn Fn(&BackendRequest) -> Option<Result<BackendReply, TransportError>> + Send + Sync>;

pub struct MockTransport {
    seed: u64,
    config: MockConfig,
    fixtures_dir: Option<PathBuf>,
    overrides: Vec<Override>,
    transcript: Mutex<Vec<TranscriptEntry>>,
}

impl MockTransport {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            config: MockConfig::default(),
            fixtures_dir: None,
            overrides: Vec::new(),
            transcript: Mutex::default(),
        }
    }

    /// Uses `dir` for canned replies and reads `dir/mock.toml` if it exists.
    pub fn with_fixtures(mut self, dir: impl Into<PathBuf>) -> Result<Self, String> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(format!("mock fixtures directory {} does not exist", dir.display()));
        }
        let cfg_path = dir.join("mock.toml");
        if cfg_path.is_file() {
            let text = std::fs::read_to_string(&cfg_path).map_err(|e| format!("{}: {e}", cfg_path.display()))?;
            self.config = toml::from_str(&text).map_err(|e| format!("{}: {e}", cfg_path.display()))?;
        }
        self.fixtures_dir = Some(dir);
        Ok(self)
    }

    pub fn with_config(mut self, config: MockConfig) -> Self {
        self.config = config;
        self
    }

    pub fn with_override(
        mut self,
        f: impl Fn(&BackendRequest) -> Option<Result<BackendReply, TransportError>> + Send + Sync + 'static,
    ) -> Self {
        self.overrides.push(Box::new(f));
        self
    }

    pub fn config(&self) -> &MockConfig {
        &self.config
    }

    pub fn calls(&self) -> usize {
        self.transcript.lock().unwrap().len()
    }

    pub fn calls_for(&self, role: Role) -> usize {
        self.transcript.lock().unwrap().iter().filter(|e| e.role == role).count()
    }

    /// Transcript in canonical order (role, digest, source).
    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        let mut t = self.transcript.lock().unwrap().clone();
        t.sort();
        t
    }

    pub fn write_transcript(&self, path: &Path) -> std::io::Result<()> {
        let mut out = String::new();
        for e in self.transcript() {
            out.push_str(&serde_json::to_string(&e).expect("transcript entry serializes"));
            out.push('\n');
        }
        std::fs::write(path, out)
    }

    fn record(&self, request: &BackendRequest, digest: &ContentDigest, source: &str) {
        self.transcript.lock().unwrap().push(TranscriptEntry {
            role: request.role,
            request_digest: digest.to_string(),
            source: source.to_string(),
        });
    }

    fn fixture(&self, digest: &ContentDigest) -> Option<BackendReply> {
        let dir = self.fixtures_dir.as_ref()?;
        let text = dir.join(format!("{digest}.txt"));
        if let Ok(t) = std::fs::read_to_string(&text) {
            return Some(BackendReply::Text(t));
        }
        let png = dir.join(format!("{digest}.png"));
        std::fs::read(png).ok().map(|data| BackendReply::Image(ImagePayload::png(data)))
    }

    fn rng_for(&self, digest: &ContentDigest) -> ChaCha8Rng {
        let mixed = ContentDigest::of_parts([self.seed.to_le_bytes().as_slice(), digest.as_str().as_bytes()]);
        let mut seed = [0u8; 32];
        hex::decode_to_slice(mixed.as_str(), &mut seed).expect("digest is 64 hex chars");
        ChaCha8Rng::from_seed(seed)
    }

    fn generate(&self, request: &BackendRequest, rng: &mut ChaCha8Rng) -> Result<BackendReply, TransportError> {
        let field = |k: &str| request.fields.get(k).map(String::as_str).unwrap_or("");
        match (request.role, field("task")) {
            (Role::StructuredText, "triplet") => {
                let category: EditCategory = field("category").parse().map_err(TransportError::Malformed)?;
                Ok(BackendReply::Text(mock_triplet(category, rng)))
            }
            (Role::StructuredText, "graph") => Ok(BackendReply::Text(mock_graph(
                field("sample_id"),
                field("edit_instruction"),
                self.config.graph_shape,
            ))),
            (Role::ImageEdit, _) => Ok(BackendReply::Image(mock_image(self.config.image_size, rng))),
            (Role::Vqa, _) => {
                let yes = match self.config.vqa {
                    VqaPolicy::AllYes => true,
                    VqaPolicy::AllNo => false,
                    VqaPolicy::IcqOnly => field("category") == "ICQ",
                    VqaPolicy::Random => rng.random::<f64>() < self.config.p_yes,
                };
                Ok(BackendReply::Text(if yes { "Yes." } else { "No." }.to_string()))
            }
            (role, task) => Err(TransportError::Malformed(format!("mock cannot answer {role} task {task:?}"))),
        }
    }
}

impl Transport for MockTransport {
    fn send(&self, request: &BackendRequest, _endpoint: &BackendEndpoint) -> Result<BackendReply, TransportError> {
        let digest = request.digest();
        for f in &self.overrides {
            if let Some(reply) = f(request) {
                self.record(request, &digest, "override");
                return reply;
            }
        }
        if let Some(reply) = self.fixture(&digest) {
            self.record(request, &digest, "fixture");
            return Ok(reply);
        }
        self.record(request, &digest, "generated");
        let mut rng = self.rng_for(&digest);
        self.generate(request, &mut rng)
    }
}

const GARMENTS: [&str; 8] = ["sweater", "jacket", "dress", "shirt", "coat", "skirt", "hoodie", "blouse"];
const COLORS: [&str; 8] = ["gray", "blue", "red", "black", "white", "green", "beige", "navy"];
const MATERIALS: [&str; 6] = ["cotton", "silk", "wool", "denim", "linen", "leather"];
const SHAPES: [&str; 5] = ["straight-cut", "flared", "cropped", "oversized", "slim-fit"];
// (with article, bare)
const COMPONENTS: [(&str, &str); 6] = [
    ("a chest pocket", "chest pocket"),
    ("a hood", "hood"),
    ("a front zipper", "front zipper"),
    ("two side pockets", "side pockets"),
    ("a fabric belt", "fabric belt"),
    ("a ruffled hem", "ruffled hem"),
];

fn pick_other<'a, T: PartialEq>(items: &'a [T], not: &T, rng: &mut ChaCha8Rng) -> &'a T {
    loop {
        let x = items.choose(rng).expect("non-empty");
        if x != not {
            return x;
        }
    }
}

fn mock_triplet(category: EditCategory, rng: &mut ChaCha8Rng) -> String {
    let garment = *GARMENTS.choose(rng).unwrap();
    let color = *COLORS.choose(rng).unwrap();
    let material = *MATERIALS.choose(rng).unwrap();
    let shape = *SHAPES.choose(rng).unwrap();
    let comp = *COMPONENTS.choose(rng).unwrap();
    let describe =
        |color: &str, shape: &str, material: &str, tail: &str| format!("A {color} {shape} {material} {garment}{tail}");
    let original = describe(color, shape, material, &format!(" with {}", comp.0));
    let (instruction, edited) = match category {
        EditCategory::ObjectRemoval => {
            (format!("Remove the {} from the {garment}", comp.1), describe(color, shape, material, ""))
        }
        EditCategory::ObjectReplacement => {
            let other = pick_other(&COMPONENTS, &comp, rng);
            (
                format!("Replace the {} with {}", comp.1, other.0),
                describe(color, shape, material, &format!(" with {}", other.0)),
            )
        }
        EditCategory::ObjectAddition => {
            let other = pick_other(&COMPONENTS, &comp, rng);
            (
                format!("Add {} to the {garment}", other.0),
                describe(color, shape, material, &format!(" with {} and {}", comp.0, other.0)),
            )
        }
        EditCategory::MaterialReplacement => {
            let m = *pick_other(&MATERIALS, &material, rng);
            (
                format!("Change the material of the {garment} to {m}"),
                describe(color, shape, m, &format!(" with {}", comp.0)),
            )
        }
        EditCategory::ColorAlteration => {
            let c = *pick_other(&COLORS, &color, rng);
            (
                format!("Change the color of the {garment} to {c}"),
                describe(c, shape, material, &format!(" with {}", comp.0)),
            )
        }
        EditCategory::StructuralAlteration => {
            let s = *pick_other(&SHAPES, &shape, rng);
            (
                format!("Reshape the {garment} into a {s} silhouette"),
                describe(color, s, material, &format!(" with {}", comp.0)),
            )
        }
    };
    json!({
        "original_description": original,
        "edit_instruction": instruction,
        "edited_description": edited,
    })
    .to_string()
}

fn mock_graph(sample_id: &str, instruction: &str, shape: GraphShape) -> String {
    let icq = json!({"id": "q1", "text": format!("Has this edit been applied: {}?", instruction.trim_end_matches('.')), "category": "ICQ", "parents": []});
    let cpq = json!({"id": "c1", "text": "Are the garment regions not mentioned in the instruction unchanged?", "category": "CPQ", "parents": []});
    let questions = match shape {
        GraphShape::IcqCpq => vec![icq, cpq],
        GraphShape::Full => vec![
            icq,
            json!({"id": "q2", "text": "Is the edited region consistent with the rest of the garment?", "category": "IDQ", "parents": ["q1"]}),
            json!({"id": "q3", "text": "Are the fine details of the edited region free of artifacts?", "category": "IDQ", "parents": ["q2"]}),
            cpq,
            json!({"id": "c2", "text": "Is the background unchanged?", "category": "CPQ", "parents": []}),
        ],
    };
    json!({"sample_id": sample_id, "questions": questions}).to_string()
}

fn mock_image(size: u32, rng: &mut ChaCha8Rng) -> ImagePayload {
    let base: [u8; 3] = rng.random();
    let img = image::RgbImage::from_fn(size, size, |x, y| {
        image::Rgb([base[0].wrapping_add((x / 8) as u8), base[1].wrapping_add((y / 8) as u8), base[2]])
    });
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png).expect("in-memory PNG encoding");
    ImagePayload::png(buf.into_inner())
}
