use std::sync::Arc;
use std::time::Duration;

use super::{BackendError, BackendRequest, RateLimiter, ResponseCache, Transport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: usize,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_retries: usize) -> Self {
        RetryPolicy {
            max_retries,
            base_delay: Duration::ZERO,
        }
    }

    fn delay(&self, retry: usize) -> Duration {
        self.base_delay * 2u32.saturating_pow(retry as u32)
    }
}

/// Cache-first, retrying, rate-limited gateway to a [`Transport`].
/// Cheap to clone; safe to share across worker threads.
#[derive(Clone)]
pub struct BackendClient {
    transport: Arc<dyn Transport>,
    cache: Option<ResponseCache>,
    retry: RetryPolicy,
    limiter: Option<Arc<RateLimiter>>,
}

impl BackendClient {
    pub fn new(transport: Arc<dyn Transport>) -> Self {
        BackendClient {
            transport,
            cache: None,
            retry: RetryPolicy::default(),
            limiter: None,
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_rate_limiter(mut self, limiter: Arc<RateLimiter>) -> Self {
        self.limiter = Some(limiter);
        self
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_ref()
    }

    pub fn call(&self, req: &BackendRequest) -> Result<Vec<u8>, BackendError> {
        req.check().map_err(|message| BackendError::Decode {
            role: req.role,
            message,
        })?;
        let key = req.cache_key();
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(&key) {
                return Ok(hit);
            }
        }
        let mut attempt = 0;
        let response = loop {
            if let Some(l) = &self.limiter {
                l.acquire();
            }
            match self.transport.send(req) {
                Ok(bytes) => break bytes,
                Err(e) if e.is_retryable() && attempt < self.retry.max_retries => {
                    let delay = self.retry.delay(attempt);
                    tracing::warn!(role = %req.role, attempt, error = %e, "backend call failed; retrying");
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) if e.is_retryable() => {
                    return Err(BackendError::Exhausted {
                        attempts: attempt + 1,
                        last: Box::new(e),
                    })
                }
                Err(e) => return Err(e),
            }
        };
        if let Some(cache) = &self.cache {
            if let Err(e) = cache.put(&key, &response) {
                tracing::warn!(error = %e, "failed to store cache entry");
            }
        }
        Ok(response)
    }
}
