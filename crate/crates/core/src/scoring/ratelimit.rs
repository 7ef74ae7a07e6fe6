use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Token bucket refilled at `rate` tokens per second holding at most
/// `burst` tokens; starts full.
#[derive(Debug)]
pub struct TokenBucket {
    interval: Duration,
    burst: u32,
    // Earliest instant at which the bucket is full again.
    full_at: Mutex<Option<Instant>>,
}

impl TokenBucket {
    pub fn new(rate: f64, burst: u32) -> Self {
        assert!(rate > 0.0 && rate.is_finite(), "rate must be positive");
        Self {
            interval: Duration::from_secs_f64(1.0 / rate),
            burst: burst.max(1),
            full_at: Mutex::new(None),
        }
    }

    /// Reserves one token and returns how long the caller must wait before
    /// using it.
    pub fn reserve(&self, now: Instant) -> Duration {
        let mut full_at = self.full_at.lock().expect("rate limiter poisoned");
        let window = self.interval * (self.burst - 1);
        // the token is usable once at most `burst - 1` reservations are pending
        let base = full_at.map_or(now, |t| t.max(now));
        let ready = base.checked_sub(window).map_or(now, |t| t.max(now));
        *full_at = Some(base + self.interval);
        ready - now
    }

    /// Blocks until a token is available.
    pub fn acquire(&self) {
        let wait = self.reserve(Instant::now());
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_without_burst() {
        let bucket = TokenBucket::new(2.0, 1);
        let t0 = Instant::now();
        let waits: Vec<f64> = (0..10).map(|_| bucket.reserve(t0).as_secs_f64()).collect();
        assert_eq!(waits[0], 0.0);
        assert!((waits[9] - 4.5).abs() < 1e-6);
        for w in waits.windows(2) {
            assert!((w[1] - w[0] - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn burst_allows_immediate_tokens() {
        let bucket = TokenBucket::new(1.0, 3);
        let t0 = Instant::now();
        let waits: Vec<f64> = (0..5).map(|_| bucket.reserve(t0).as_secs_f64()).collect();
        assert_eq!(&waits[..3], &[0.0, 0.0, 0.0]);
        assert!((waits[3] - 1.0).abs() < 1e-6);
        assert!((waits[4] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn idle_time_refills() {
        let bucket = TokenBucket::new(10.0, 1);
        let t0 = Instant::now();
        assert!(bucket.reserve(t0).is_zero());
        assert!(bucket.reserve(t0 + Duration::from_secs(1)).is_zero());
    }
}
