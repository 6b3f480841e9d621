//! On-disk cache of stage results, one JSON file per key under
//! `<root>/<first two hex of key>/<key>.json`.
//!
//! Writes are atomic renames, so concurrent readers never see a partial entry.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::digest::ContentDigest;
use crate::fsutil::write_atomic;

#[derive(Debug)]
pub struct ArtifactCache {
    root: PathBuf,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl ArtifactCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into(), hits: AtomicU64::new(0), misses: AtomicU64::new(0) }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, key: &ContentDigest) -> PathBuf {
        self.root.join(&key.as_str()[..2]).join(format!("{key}.json"))
    }

    /// A missing or unreadable entry counts as a miss.
    pub fn get<T: DeserializeOwned>(&self, key: &ContentDigest) -> Option<T> {
        let value = std::fs::read(self.path(key)).ok().and_then(|b| serde_json::from_slice(&b).ok());
        match value {
            Some(v) => {
                self.hits.fetch_add(1, Ordering::Relaxed);
                Some(v)
            }
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }

    pub fn put<T: Serialize>(&self, key: &ContentDigest, value: &T) -> std::io::Result<()> {
        let bytes = serde_json::to_vec_pretty(value).map_err(std::io::Error::other)?;
        write_atomic(&self.path(key), &bytes)
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }
}

/// Cache key for one stage: digest of its inputs, template version and backend role.
pub fn stage_key<P: AsRef<[u8]>>(
    stage: &str,
    inputs: impl IntoIterator<Item = P>,
    template_version: &str,
    role: &str,
) -> ContentDigest {
    let mut parts: Vec<Vec<u8>> = vec![stage.as_bytes().to_vec()];
    parts.extend(inputs.into_iter().map(|p| p.as_ref().to_vec()));
    parts.push(template_version.as_bytes().to_vec());
    parts.push(role.as_bytes().to_vec());
    ContentDigest::of_parts(parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_get_and_counters() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ArtifactCache::new(dir.path());
        let k = stage_key("t", ["a"], "v1", "vqa");
        assert_eq!(cache.get::<String>(&k), None);
        cache.put(&k, &"hello".to_string()).unwrap();
        assert_eq!(cache.get::<String>(&k).as_deref(), Some("hello"));
        assert_eq!((cache.hits(), cache.misses()), (1, 1));
        assert!(dir.path().join(&k.as_str()[..2]).join(format!("{k}.json")).is_file());
    }

    #[test]
    fn key_changes_with_each_component() {
        let base = stage_key("t", ["a"], "v1", "vqa");
        assert_ne!(base, stage_key("u", ["a"], "v1", "vqa"));
        assert_ne!(base, stage_key("t", ["b"], "v1", "vqa"));
        assert_ne!(base, stage_key("t", ["a"], "v2", "vqa"));
        assert_ne!(base, stage_key("t", ["a"], "v1", "image_edit"));
    }
}
