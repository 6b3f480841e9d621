use std::io::Cursor;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SynthesisError;
use crate::backends::ImagePayload;
use crate::digest::ContentDigest;
use crate::fsutil::write_atomic;

/// Smallest allowed side length, in pixels.
pub const MIN_SIDE: u32 = 512;

/// A stored image, identified by its content digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageRef {
    pub id: String,
    pub location: String,
    pub width: u32,
    pub height: u32,
    pub sha256: ContentDigest,
}

impl ImageRef {
    pub fn extension(&self) -> &str {
        Path::new(&self.location).extension().and_then(|e| e.to_str()).unwrap_or("png")
    }

    pub fn media_type(&self) -> &'static str {
        match self.extension() {
            "jpg" | "jpeg" => "image/jpeg",
            _ => "image/png",
        }
    }
}

/// Width, height and canonical extension of encoded image bytes.
pub fn inspect_image(bytes: &[u8]) -> Result<(u32, u32, &'static str), SynthesisError> {
    let reader = image::ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| SynthesisError::Image(e.to_string()))?;
    let ext = match reader.format() {
        Some(image::ImageFormat::Png) => "png",
        Some(image::ImageFormat::Jpeg) => "jpg",
        other => return Err(SynthesisError::Image(format!("unsupported image format {other:?}"))),
    };
    let (w, h) = reader.into_dimensions().map_err(|e| SynthesisError::Image(e.to_string()))?;
    Ok((w, h, ext))
}

/// Content-addressed image files under `<root>/images/<first2>/<digest>.<ext>`.
///
/// `location` in the returned refs is relative to `root`.
#[derive(Debug, Clone)]
pub struct ImageStore {
    root: PathBuf,
}

impl ImageStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Stores `bytes`, enforcing the minimum resolution. Storing the same bytes twice is a no-op.
    pub fn put(&self, bytes: &[u8]) -> Result<ImageRef, SynthesisError> {
        let (width, height, ext) = inspect_image(bytes)?;
        if width.min(height) < MIN_SIDE {
            return Err(SynthesisError::ResolutionTooLow { width, height });
        }
        let sha256 = ContentDigest::of(bytes);
        let rel = format!("images/{}/{}.{ext}", &sha256.as_str()[..2], sha256);
        let path = self.root.join(&rel);
        if !path.is_file() {
            write_atomic(&path, bytes).map_err(|e| SynthesisError::Store(e.to_string()))?;
        }
        Ok(ImageRef { id: format!("img-{}", sha256.short()), location: rel, width, height, sha256 })
    }

    pub fn ingest(&self, path: &Path) -> Result<ImageRef, SynthesisError> {
        let bytes = std::fs::read(path).map_err(|e| SynthesisError::Store(format!("{}: {e}", path.display())))?;
        self.put(&bytes)
    }

    pub fn contains(&self, image: &ImageRef) -> bool {
        self.root.join(&image.location).is_file()
    }

    /// Reads the bytes back and checks them against the recorded digest.
    pub fn load(&self, image: &ImageRef) -> Result<Vec<u8>, SynthesisError> {
        let path = self.root.join(&image.location);
        let bytes = std::fs::read(&path).map_err(|e| SynthesisError::Store(format!("{}: {e}", path.display())))?;
        let actual = ContentDigest::of(&bytes);
        if actual != image.sha256 {
            return Err(SynthesisError::DigestMismatch {
                location: image.location.clone(),
                expected: image.sha256.clone(),
                actual,
            });
        }
        Ok(bytes)
    }

    pub fn payload(&self, image: &ImageRef) -> Result<ImagePayload, SynthesisError> {
        Ok(ImagePayload { media_type: image.media_type().to_string(), data: self.load(image)? })
    }
}

#[cfg(test)]
pub(crate) fn test_png(size: u32, shade: u8) -> Vec<u8> {
    let img = image::RgbImage::from_pixel(size, size, image::Rgb([shade, 128, 255 - shade]));
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png).unwrap();
    buf.into_inner()
}
