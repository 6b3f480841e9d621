use std::time::Duration;

use rand::Rng;

use super::{BackendEndpoint, BackendError, Clock, TransportError};

/// Exponential backoff with full jitter: before retry `n` (0-based) sleep a
/// uniform draw from `[0, min(cap, initial * 2^n)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackoffPolicy {
    pub initial: Duration,
    pub cap: Duration,
}

impl Default for BackoffPolicy {
    fn default() -> Self {
        Self { initial: Duration::from_secs(1), cap: Duration::from_secs(60) }
    }
}

impl BackoffPolicy {
    pub fn ceiling(&self, retry: u32) -> Duration {
        let factor = 2u32.saturating_pow(retry.min(31));
        self.initial.saturating_mul(factor).min(self.cap)
    }

    pub fn delay<R: Rng + ?Sized>(&self, retry: u32, rng: &mut R) -> Duration {
        let ceiling = self.ceiling(retry);
        Duration::from_secs_f64(rng.random::<f64>() * ceiling.as_secs_f64())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryOutcome<T> {
    pub value: T,
    pub attempts: u32,
}

/// Runs `attempt` until it succeeds, fails permanently, or `max_retries`
/// re-attempts are used up.
pub fn call_with_retries<T, R, F>(
    endpoint: &BackendEndpoint,
    clock: &dyn Clock,
    policy: &BackoffPolicy,
    rng: &mut R,
    mut attempt: F,
) -> Result<RetryOutcome<T>, BackendError>
where
    R: Rng + ?Sized,
    F: FnMut() -> Result<T, TransportError>,
{
    let mut attempts = 0u32;
    loop {
        attempts += 1;
        let started = clock.now();
        let result = attempt();
        let latency = clock.now().saturating_sub(started);
        match result {
            Ok(value) => {
                log::debug!("{} attempt {attempts} ok in {latency:?}", endpoint.role);
                return Ok(RetryOutcome { value, attempts });
            }
            Err(cause) => {
                log::debug!("{} attempt {attempts} failed in {latency:?}: {cause}", endpoint.role);
                let retries_used = attempts - 1;
                if !cause.is_transient() || retries_used >= endpoint.max_retries {
                    return Err(BackendError::Failed { role: endpoint.role, attempts, cause });
                }
                let mut wait = policy.delay(retries_used, rng);
                if let TransportError::RateLimited { retry_after: Some(after) } = &cause {
                    wait = wait.max(*after);
                }
                log::info!("{} retrying in {wait:?} after: {cause}", endpoint.role);
                clock.sleep(wait);
            }
        }
    }
}
