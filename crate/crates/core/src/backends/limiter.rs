use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use super::Clock;

/// Counting semaphore bounding in-flight requests for one endpoint.
#[derive(Debug)]
pub struct ConcurrencyLimiter {
    max: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
    peak: AtomicUsize,
}

pub struct Permit<'a> {
    limiter: &'a ConcurrencyLimiter,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.limiter.in_flight.lock().unwrap();
        *n -= 1;
        self.limiter.freed.notify_one();
    }
}

impl ConcurrencyLimiter {
    pub fn new(max: usize) -> Self {
        Self { max: max.max(1), in_flight: Mutex::new(0), freed: Condvar::new(), peak: AtomicUsize::new(0) }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.max {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        self.peak.fetch_max(*n, Ordering::SeqCst);
        Permit { limiter: self }
    }

    /// Highest number of permits held at once so far.
    pub fn peak(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }
}

/// Sliding one-minute window: at most `per_minute` issues in any 60 s span.
#[derive(Debug)]
pub struct RateLimiter {
    per_minute: usize,
    issued: Mutex<VecDeque<Duration>>,
}

const WINDOW: Duration = Duration::from_secs(60);

impl RateLimiter {
    pub fn new(per_minute: u32) -> Self {
        Self { per_minute: per_minute.max(1) as usize, issued: Mutex::new(VecDeque::new()) }
    }

    /// Blocks (on `clock`) until a slot is free, then records the issue time.
    pub fn acquire(&self, clock: &dyn Clock) -> Duration {
        let mut issued = self.issued.lock().unwrap();
        loop {
            let now = clock.now();
            while issued.front().is_some_and(|&t| now >= t + WINDOW) {
                issued.pop_front();
            }
            if issued.len() < self.per_minute {
                issued.push_back(now);
                return now;
            }
            let wait = issued[0] + WINDOW - now;
            clock.sleep(wait);
        }
    }
}
