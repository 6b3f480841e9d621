use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    call_with_retries, vqa_request, BackendEndpoint, BackendError, BackendReply, BackendRequest, BackoffPolicy, Clock,
    ConcurrencyLimiter, ImageEditBackend, ImagePayload, RateLimiter, RetryOutcome, Role, StructuredTextBackend,
    Transport, VqaBackend,
};
use crate::score::Question;

/// One endpoint's client: rate limit, concurrency limit and retries around a transport.
pub struct BackendClient {
    endpoint: BackendEndpoint,
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    policy: BackoffPolicy,
    concurrency: ConcurrencyLimiter,
    rate: RateLimiter,
    rng: Mutex<ChaCha8Rng>,
    attempts: AtomicU64,
}

impl BackendClient {
    pub fn new(endpoint: BackendEndpoint, transport: Arc<dyn Transport>, clock: Arc<dyn Clock>, seed: u64) -> Self {
        let concurrency = ConcurrencyLimiter::new(endpoint.max_concurrency);
        let rate = RateLimiter::new(endpoint.requests_per_minute);
        let role_salt = endpoint.role as u64;
        Self {
            endpoint,
            transport,
            clock,
            policy: BackoffPolicy::default(),
            concurrency,
            rate,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed ^ role_salt.rotate_left(32))),
            attempts: AtomicU64::new(0),
        }
    }

    pub fn with_backoff(mut self, policy: BackoffPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn endpoint(&self) -> &BackendEndpoint {
        &self.endpoint
    }

    /// Attempts sent to the transport so far, retries included.
    pub fn attempts_issued(&self) -> u64 {
        self.attempts.load(Ordering::SeqCst)
    }

    pub fn peak_concurrency(&self) -> usize {
        self.concurrency.peak()
    }

    pub fn call(&self, request: &BackendRequest) -> Result<RetryOutcome<BackendReply>, BackendError> {
        if request.role != self.endpoint.role {
            return Err(BackendError::WrongRole { expected: request.role, actual: self.endpoint.role });
        }
        // per-call jitter stream so the shared generator is not held across sleeps
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng.lock().unwrap().random());
        call_with_retries(&self.endpoint, self.clock.as_ref(), &self.policy, &mut rng, || {
            self.rate.acquire(self.clock.as_ref());
            let _permit = self.concurrency.acquire();
            self.attempts.fetch_add(1, Ordering::SeqCst);
            self.transport.send(request, &self.endpoint)
        })
    }

    fn expect_role(&self, role: Role) -> Result<(), BackendError> {
        if self.endpoint.role == role {
            Ok(())
        } else {
            Err(BackendError::WrongRole { expected: role, actual: self.endpoint.role })
        }
    }
}

impl StructuredTextBackend for BackendClient {
    fn generate_text(&self, request: BackendRequest) -> Result<String, BackendError> {
        self.expect_role(Role::StructuredText)?;
        match self.call(&request)?.value {
            BackendReply::Text(t) => Ok(t),
            other => {
                Err(BackendError::UnexpectedReply { role: self.endpoint.role, expected: "text", got: other.kind() })
            }
        }
    }
}

impl ImageEditBackend for BackendClient {
    fn edit_image(&self, request: BackendRequest) -> Result<ImagePayload, BackendError> {
        self.expect_role(Role::ImageEdit)?;
        match self.call(&request)?.value {
            BackendReply::Image(img) => Ok(img),
            other => {
                Err(BackendError::UnexpectedReply { role: self.endpoint.role, expected: "image", got: other.kind() })
            }
        }
    }
}

impl VqaBackend for BackendClient {
    fn ask(&self, image: &ImagePayload, question: &Question) -> Result<String, BackendError> {
        self.expect_role(Role::Vqa)?;
        match self.call(&vqa_request(image, question))?.value {
            BackendReply::Text(t) => Ok(t),
            other => {
                Err(BackendError::UnexpectedReply { role: self.endpoint.role, expected: "text", got: other.kind() })
            }
        }
    }
}

/// The three role clients used by a pipeline run.
#[derive(Clone)]
pub struct BackendStack {
    pub structured_text: Arc<BackendClient>,
    pub image_edit: Arc<BackendClient>,
    pub vqa: Arc<BackendClient>,
}

impl BackendStack {
    pub fn new(
        endpoints: [BackendEndpoint; 3],
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
        seed: u64,
    ) -> Self {
        let [st, ie, vqa] = endpoints;
        let mk = |e: BackendEndpoint| Arc::new(BackendClient::new(e, transport.clone(), clock.clone(), seed));
        Self { structured_text: mk(st), image_edit: mk(ie), vqa: mk(vqa) }
    }

    pub fn attempts_issued(&self) -> u64 {
        self.structured_text.attempts_issued() + self.image_edit.attempts_issued() + self.vqa.attempts_issued()
    }
}
