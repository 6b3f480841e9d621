use std::collections::BTreeMap;

use super::{EditCategory, ImageRef, ImageStore, SynthesisError, TextTriplet};
use crate::backends::{BackendRequest, ImageEditBackend, Role, StructuredTextBackend};
use crate::cache::{stage_key, ArtifactCache};
use crate::template::PromptTemplate;

/// Fills a proposal template. Bound slots: `category`, `category_definition`,
/// `original_image_hint`, `image_width`, `image_height`.
pub fn render_prompt(
    template: &PromptTemplate,
    image: &ImageRef,
    category: EditCategory,
) -> Result<String, SynthesisError> {
    let bindings = BTreeMap::from([
        ("category", category.display_name().to_string()),
        ("category_definition", category.definition().to_string()),
        ("original_image_hint", image.id.clone()),
        ("image_width", image.width.to_string()),
        ("image_height", image.height.to_string()),
    ]);
    Ok(template.render(&bindings)?)
}

/// Asks the text backend (with the original image attached) for one triplet of `category`.
/// `round` distinguishes repeated requests for the same (image, category).
pub fn generate_triplet(
    image: &ImageRef,
    store: &ImageStore,
    category: EditCategory,
    round: usize,
    template: &PromptTemplate,
    backend: &dyn StructuredTextBackend,
) -> Result<TextTriplet, SynthesisError> {
    let prompt = render_prompt(template, image, category)?;
    let request = BackendRequest::new(Role::StructuredText, prompt)
        .field("task", "triplet")
        .field("category", category.snake_case())
        .field("image_id", image.id.as_str())
        .field("round", round.to_string())
        .field("template_version", template.version())
        .image(store.payload(image)?);
    let reply = backend.generate_text(request)?;
    TextTriplet::from_reply(&reply, category)
}

pub fn edited_image_key(
    original: &ImageRef,
    triplet: &TextTriplet,
    template_version: &str,
) -> crate::digest::ContentDigest {
    let triplet_json = serde_json::to_string(triplet).expect("triplet serializes");
    stage_key(
        "edit_image",
        [original.sha256.as_str(), triplet_json.as_str()],
        template_version,
        Role::ImageEdit.as_str(),
    )
}

/// Requests the edited image, storing it content-addressed. Served from
/// `cache` when the same (original, triplet, template version) was seen before.
/// The flag is true on a cache hit.
pub fn generate_edited_image(
    original: &ImageRef,
    triplet: &TextTriplet,
    template_version: &str,
    store: &ImageStore,
    cache: &ArtifactCache,
    backend: &dyn ImageEditBackend,
) -> Result<(ImageRef, bool), SynthesisError> {
    let key = edited_image_key(original, triplet, template_version);
    if let Some(hit) = cache.get::<ImageRef>(&key) {
        if store.contains(&hit) {
            return Ok((hit, true));
        }
    }
    let prompt = format!("{}\nThe result should match: {}", triplet.edit_instruction, triplet.edited_description);
    let request = BackendRequest::new(Role::ImageEdit, prompt)
        .field("task", "edit")
        .field("category", triplet.category.snake_case())
        .field("edit_instruction", triplet.edit_instruction.as_str())
        .field("edited_description", triplet.edited_description.as_str())
        .field("template_version", template_version)
        .image(store.payload(original)?);
    let edited = backend.edit_image(request).map_err(|e| {
        if e.is_rejection() {
            SynthesisError::ContentRejected(e.to_string())
        } else {
            SynthesisError::Backend(e)
        }
    })?;
    let stored = store.put(&edited.data)?;
    cache.put(&key, &stored).map_err(|e| SynthesisError::Store(e.to_string()))?;
    Ok((stored, false))
}

/// One synthesis request slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SynthesisTask {
    pub image_index: usize,
    pub category: EditCategory,
    /// Repetition index within (image, category).
    pub round: usize,
}

/// Round-robin order: every image gets every category once per round
/// before any (image, category) pair repeats.
pub fn round_robin(image_count: usize, per_category: usize) -> Vec<SynthesisTask> {
    let mut out = Vec::with_capacity(image_count * per_category * EditCategory::ALL.len());
    for round in 0..per_category {
        for image_index in 0..image_count {
            for category in EditCategory::ALL {
                out.push(SynthesisTask { image_index, category, round });
            }
        }
    }
    out
}
