//! Clients for the three remote model roles: structured text generation,
//! image editing and visual question answering.
//!
//! Every role speaks the same wire shape: a [`BackendRequest`] carrying a
//! prompt, string fields and base64 image payloads, answered by a
//! [`BackendReply`] holding text or an image. A [`Transport`] moves requests
//! (HTTP in production, [`MockTransport`] offline) and a [`BackendClient`]
//! adds per-endpoint concurrency and rate limits plus retries.

mod client;
mod clock;
mod http;
mod limiter;
mod mock;
mod retry;
mod vqa;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::ContentDigest;
use crate::score::Question;

pub use client::{BackendClient, BackendStack};
pub use clock::{Clock, SystemClock, VirtualClock};
pub use http::HttpTransport;
pub use limiter::{ConcurrencyLimiter, Permit, RateLimiter};
pub use mock::{GraphShape, MockConfig, MockTransport, TranscriptEntry, VqaPolicy};
pub use retry::{call_with_retries, BackoffPolicy, RetryOutcome};
pub use vqa::{normalize_vqa_reply, VqaVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    StructuredText,
    ImageEdit,
    Vqa,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::StructuredText, Role::ImageEdit, Role::Vqa];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::StructuredText => "structured_text",
            Role::ImageEdit => "image_edit",
            Role::Vqa => "vqa",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Connection and limit settings for one remote role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendEndpoint {
    pub role: Role,
    #[serde(default)]
    pub base_url: Option<String>,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub auth_token_env: Option<String>,
    /// Seconds.
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_max_concurrency")]
    pub max_concurrency: usize,
    #[serde(default = "default_rpm")]
    pub requests_per_minute: u32,
}

fn default_timeout() -> f64 {
    120.0
}
fn default_max_retries() -> u32 {
    3
}
fn default_max_concurrency() -> usize {
    4
}
fn default_rpm() -> u32 {
    60
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("endpoint {role}: {message}")]
pub struct EndpointError {
    pub role: Role,
    pub message: String,
}

impl BackendEndpoint {
    pub fn new(role: Role) -> Self {
        Self {
            role,
            base_url: None,
            auth_token_env: None,
            timeout: default_timeout(),
            max_retries: default_max_retries(),
            max_concurrency: default_max_concurrency(),
            requests_per_minute: default_rpm(),
        }
    }

    pub fn validate(&self) -> Result<(), EndpointError> {
        let fail = |m: &str| Err(EndpointError { role: self.role, message: m.to_string() });
        if !(self.timeout.is_finite() && self.timeout > 0.0) {
            return fail("timeout must be > 0");
        }
        if self.max_concurrency < 1 {
            return fail("max_concurrency must be >= 1");
        }
        if self.requests_per_minute < 1 {
            return fail("requests_per_minute must be >= 1");
        }
        Ok(())
    }

    pub fn timeout_duration(&self) -> Duration {
        Duration::from_secs_f64(self.timeout)
    }
}

/// An image attached to a request or returned by the image-edit role.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImagePayload {
    pub media_type: String,
    #[serde(with = "b64")]
    pub data: Vec<u8>,
}

impl fmt::Debug for ImagePayload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImagePayload").field("media_type", &self.media_type).field("bytes", &self.data.len()).finish()
    }
}

impl ImagePayload {
    pub fn png(data: Vec<u8>) -> Self {
        Self { media_type: "image/png".into(), data }
    }
}

pub(crate) mod b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        STANDARD.decode(s.as_bytes()).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendRequest {
    pub role: Role,
    pub prompt: String,
    pub fields: BTreeMap<String, String>,
    pub images: Vec<ImagePayload>,
}

impl BackendRequest {
    pub fn new(role: Role, prompt: impl Into<String>) -> Self {
        Self { role, prompt: prompt.into(), fields: BTreeMap::new(), images: Vec::new() }
    }

    pub fn field(mut self, key: &str, value: impl Into<String>) -> Self {
        self.fields.insert(key.to_string(), value.into());
        self
    }

    pub fn image(mut self, image: ImagePayload) -> Self {
        self.images.push(image);
        self
    }

    /// Identity of the request: role, prompt, fields and image digests.
    pub fn digest(&self) -> ContentDigest {
        let mut parts: Vec<Vec<u8>> = vec![self.role.as_str().into(), self.prompt.clone().into_bytes()];
        for (k, v) in &self.fields {
            parts.push(k.clone().into_bytes());
            parts.push(v.clone().into_bytes());
        }
        for img in &self.images {
            parts.push(img.media_type.clone().into_bytes());
            parts.push(ContentDigest::of(&img.data).to_string().into_bytes());
        }
        ContentDigest::of_parts(parts)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendReply {
    Text(String),
    Image(ImagePayload),
}

impl BackendReply {
    fn kind(&self) -> &'static str {
        match self {
            BackendReply::Text(_) => "text",
            BackendReply::Image(_) => "image",
        }
    }
}

/// Failure of a single attempt.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connection(String),
    #[error("rate limited")]
    RateLimited { retry_after: Option<Duration> },
    #[error("HTTP status {code}: {message}")]
    Status { code: u16, message: String },
    #[error("request rejected by backend: {0}")]
    Rejected(String),
    #[error("malformed reply: {0}")]
    Malformed(String),
}

impl TransportError {
    /// Timeouts, connection failures, rate limits, 408 and 5xx are worth retrying.
    pub fn is_transient(&self) -> bool {
        match self {
            TransportError::Timeout | TransportError::Connection(_) | TransportError::RateLimited { .. } => true,
            TransportError::Status { code, .. } => *code == 408 || (500..=599).contains(code),
            TransportError::Rejected(_) | TransportError::Malformed(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("{role} backend failed after {attempts} attempt(s): {cause}")]
    Failed { role: Role, attempts: u32, cause: TransportError },
    #[error("expected a {expected} reply from {role}, got {got}")]
    UnexpectedReply { role: Role, expected: &'static str, got: &'static str },
    #[error("client for {actual} used as {expected}")]
    WrongRole { expected: Role, actual: Role },
}

impl BackendError {
    pub fn attempts(&self) -> u32 {
        match self {
            BackendError::Failed { attempts, .. } => *attempts,
            _ => 0,
        }
    }

    pub fn is_rejection(&self) -> bool {
        matches!(self, BackendError::Failed { cause: TransportError::Rejected(_), .. })
    }
}

/// Moves one request to a backend and returns its reply. One attempt, no retries.
pub trait Transport: Send + Sync {
    fn send(&self, request: &BackendRequest, endpoint: &BackendEndpoint) -> Result<BackendReply, TransportError>;
}

/// Free-form or JSON text generation, optionally conditioned on images.
/// Triplet proposal and graph extraction both go through this role.
pub trait StructuredTextBackend: Send + Sync {
    fn generate_text(&self, request: BackendRequest) -> Result<String, BackendError>;
}

pub trait ImageEditBackend: Send + Sync {
    fn edit_image(&self, request: BackendRequest) -> Result<ImagePayload, BackendError>;
}

pub trait VqaBackend: Send + Sync {
    /// Raw reply text; verdict normalization is done by the caller.
    fn ask(&self, image: &ImagePayload, question: &Question) -> Result<String, BackendError>;
}

/// The request a VQA client sends for one question.
pub fn vqa_request(image: &ImagePayload, question: &Question) -> BackendRequest {
    let prompt = format!("Answer with \"yes\" or \"no\" only. {}", question.text());
    BackendRequest::new(Role::Vqa, prompt)
        .field("task", "vqa")
        .field("question_id", question.id().as_str())
        .field("question", question.text())
        .field("category", question.category().as_str())
        .image(image.clone())
}

/// Replaces every occurrence of `secret` in `text`.
pub fn scrub(text: &str, secret: Option<&str>) -> String {
    match secret {
        Some(s) if !s.is_empty() => text.replace(s, "[REDACTED]"),
        _ => text.to_string(),
    }
}
