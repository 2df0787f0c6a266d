//! Token-bucket pacing for the traffic generators.

use std::time::{Duration, Instant};

/// Classic token bucket: `target_rate_pps` tokens per second, burst bounded
/// by `bucket_depth`. Long-run send rate never exceeds the target.
#[derive(Debug)]
pub struct PacingBucket {
    target_rate_pps: u64,
    bucket_depth: u64,
    tokens: f64,
    last_refill: Instant,
}

impl PacingBucket {
    pub fn new(target_rate_pps: u64) -> Self {
        // depth of ~10 ms worth of traffic keeps bursts short while riding
        // out sleep overshoot, which costs tokens at shallow depths
        let depth = (target_rate_pps / 100).clamp(8, 512);
        Self::with_depth(target_rate_pps, depth)
    }

    pub fn with_depth(target_rate_pps: u64, bucket_depth: u64) -> Self {
        assert!(target_rate_pps > 0, "rate must be positive");
        assert!(bucket_depth > 0);
        PacingBucket {
            target_rate_pps,
            bucket_depth,
            tokens: bucket_depth as f64,
            last_refill: Instant::now(),
        }
    }

    pub fn target_rate_pps(&self) -> u64 {
        self.target_rate_pps
    }

    fn refill(&mut self, now: Instant) {
        let dt = now.duration_since(self.last_refill).as_secs_f64();
        self.last_refill = now;
        self.tokens =
            (self.tokens + dt * self.target_rate_pps as f64).min(self.bucket_depth as f64);
    }

    /// Takes one token if available; otherwise returns how long to wait.
    pub fn try_take(&mut self, now: Instant) -> Result<(), Duration> {
        self.refill(now);
        if self.tokens >= 1.0 {
            self.tokens -= 1.0;
            Ok(())
        } else {
            let deficit = 1.0 - self.tokens;
            Err(Duration::from_secs_f64(deficit / self.target_rate_pps as f64))
        }
    }

    /// Blocks until a token is available, then takes it.
    pub fn take_blocking(&mut self) {
        loop {
            match self.try_take(Instant::now()) {
                Ok(()) => return,
                Err(wait) => std::thread::sleep(wait),
            }
        }
    }
}
