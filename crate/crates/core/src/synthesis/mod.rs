//! Triplet proposal and edited-image generation.

mod category;
mod generate;
mod image;
mod templates;
mod triplet;

use thiserror::Error;

use crate::backends::BackendError;
use crate::digest::ContentDigest;
use crate::template::TemplateError;

pub use category::EditCategory;
pub use generate::{
    edited_image_key, generate_edited_image, generate_triplet, render_prompt, round_robin, SynthesisTask,
};
pub use image::{inspect_image, ImageRef, ImageStore, MIN_SIDE};
pub use templates::{TemplateSet, EXTRACTION_TEMPLATE};
pub use triplet::TextTriplet;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("backend reply violates schema: {reason}")]
    SchemaViolation { reason: String, raw: String },
    #[error("image edit refused: {0}")]
    ContentRejected(String),
    #[error("image resolution {width}x{height} below the {MIN_SIDE}px floor")]
    ResolutionTooLow { width: u32, height: u32 },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("cannot decode image: {0}")]
    Image(String),
    #[error("image store: {0}")]
    Store(String),
    #[error("stored image {location} has digest {actual}, expected {expected}")]
    DigestMismatch { location: String, expected: ContentDigest, actual: ContentDigest },
}
