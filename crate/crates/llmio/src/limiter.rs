use std::time::Duration;

use tokio::sync::{Mutex, Semaphore, SemaphorePermit};
use tokio::time::Instant;

/// Per-provider admission control: a concurrency semaphore plus an evenly
/// spaced request-start schedule derived from requests-per-minute.
#[derive(Debug)]
pub(crate) struct ProviderLimiter {
    in_flight: Semaphore,
    interval: Option<Duration>,
    next_slot: Mutex<Option<Instant>>,
}

impl ProviderLimiter {
    pub(crate) fn new(max_concurrency: usize, requests_per_minute: u32) -> Self {
        let interval = (requests_per_minute > 0)
            .then(|| Duration::from_secs_f64(60.0 / f64::from(requests_per_minute)));
        Self {
            in_flight: Semaphore::new(max_concurrency.max(1)),
            interval,
            next_slot: Mutex::new(None),
        }
    }

    /// Waits for both a concurrency permit and the next rate slot.
    pub(crate) async fn admit(&self) -> SemaphorePermit<'_> {
        let permit = self
            .in_flight
            .acquire()
            .await
            .expect("limiter semaphore is never closed");
        if let Some(interval) = self.interval {
            let slot = {
                let mut next = self.next_slot.lock().await;
                let now = Instant::now();
                let slot = match *next {
                    Some(t) if t > now => t,
                    _ => now,
                };
                *next = Some(slot + interval);
                slot
            };
            tokio::time::sleep_until(slot).await;
        }
        permit
    }
}
