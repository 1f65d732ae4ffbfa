use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

/// Spaces calls at least `60 / per_minute` seconds apart across all holders.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

static GLOBAL: OnceLock<Arc<RateLimiter>> = OnceLock::new();

impl RateLimiter {
    pub fn per_minute(per_minute: u32) -> Self {
        let interval = if per_minute == 0 {
            Duration::ZERO
        } else {
            Duration::from_secs_f64(60.0 / per_minute as f64)
        };
        RateLimiter {
            interval,
            next_slot: Mutex::new(None),
        }
    }

    /// Process-wide limiter; the first caller fixes the rate.
    pub fn global(per_minute: u32) -> Arc<RateLimiter> {
        GLOBAL
            .get_or_init(|| Arc::new(RateLimiter::per_minute(per_minute)))
            .clone()
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    pub fn acquire(&self) {
        if self.interval.is_zero() {
            return;
        }
        let wait = {
            let mut slot = self.next_slot.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let start = match *slot {
                Some(t) if t > now => t,
                _ => now,
            };
            *slot = Some(start + self.interval);
            start.saturating_duration_since(now)
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}
