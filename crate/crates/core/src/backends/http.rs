use std::time::Duration;

use serde::Deserialize;

use super::{scrub, BackendEndpoint, BackendReply, BackendRequest, ImagePayload, Transport, TransportError};

const MAX_REPLY_BYTES: u64 = 64 * 1024 * 1024;

/// JSON-over-HTTP transport.
///
/// The request is POSTed to the endpoint's `base_url` as the serialized
/// [`BackendRequest`] (images base64-encoded). The reply body must be one of
/// `{"text": ...}`, `{"image": {"media_type", "data"}}` or `{"rejected": reason}`.
/// The bearer token is read from the environment variable named by
/// `auth_token_env` on every call and is scrubbed from every error message.
#[derive(Debug, Default, Clone)]
pub struct HttpTransport;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireReply {
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    image: Option<ImagePayload>,
    #[serde(default)]
    rejected: Option<String>,
}

impl HttpTransport {
    pub fn new() -> Self {
        Self
    }
}

fn parse_reply(body: &str) -> Result<BackendReply, TransportError> {
    let wire: WireReply = serde_json::from_str(body).map_err(|e| TransportError::Malformed(e.to_string()))?;
    match (wire.text, wire.image, wire.rejected) {
        (_, _, Some(reason)) => Err(TransportError::Rejected(reason)),
        (Some(t), None, None) => Ok(BackendReply::Text(t)),
        (None, Some(img), None) => Ok(BackendReply::Image(img)),
        _ => Err(TransportError::Malformed("reply must carry exactly one of text, image, rejected".into())),
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: &BackendRequest, endpoint: &BackendEndpoint) -> Result<BackendReply, TransportError> {
        let url = endpoint
            .base_url
            .as_deref()
            .ok_or_else(|| TransportError::Connection(format!("no base_url configured for {}", endpoint.role)))?;
        let token = match &endpoint.auth_token_env {
            Some(var) => Some(std::env::var(var).map_err(|_| TransportError::Status {
                code: 401,
                message: format!("credential environment variable {var} is not set"),
            })?),
            None => None,
        };
        let secret = token.as_deref();
        let clean = |s: String| scrub(&s, secret);

        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(endpoint.timeout_duration()))
            .http_status_as_error(false)
            .build()
            .into();
        let mut req = agent.post(url).header("Content-Type", "application/json");
        if let Some(t) = secret {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let body = serde_json::to_vec(request).map_err(|e| TransportError::Malformed(e.to_string()))?;
        let mut resp = req.send(&body[..]).map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportError::Timeout,
            other => TransportError::Connection(clean(other.to_string())),
        })?;

        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = resp.body_mut().with_config().limit(MAX_REPLY_BYTES).read_to_string().map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportError::Timeout,
            other => TransportError::Connection(clean(other.to_string())),
        })?;

        match status {
            200..=299 => parse_reply(&text).map_err(|e| match e {
                TransportError::Malformed(m) => TransportError::Malformed(clean(m)),
                TransportError::Rejected(m) => TransportError::Rejected(clean(m)),
                other => other,
            }),
            429 => Err(TransportError::RateLimited { retry_after }),
            code => {
                let snippet: String = text.chars().take(200).collect();
                Err(TransportError::Status { code, message: clean(snippet) })
            }
        }
    }
}
