use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::{BackendError, BackendRequest};

/// Delivers one request to a model and returns the raw response body.
pub trait Transport: Send + Sync {
    fn send(&self, req: &BackendRequest) -> Result<Vec<u8>, BackendError>;
}

/// Fails every call; stands in for the network where none is allowed.
#[derive(Debug, Default, Clone)]
pub struct SentinelTransport;

impl Transport for SentinelTransport {
    fn send(&self, req: &BackendRequest) -> Result<Vec<u8>, BackendError> {
        Err(BackendError::NetworkForbidden(req.describe()))
    }
}

/// Counts calls that reach the wrapped transport.
#[derive(Clone)]
pub struct CountingTransport {
    inner: Arc<dyn Transport>,
    count: Arc<AtomicUsize>,
}

impl CountingTransport {
    pub fn new(inner: Arc<dyn Transport>) -> Self {
        CountingTransport {
            inner,
            count: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn count(&self) -> usize {
        self.count.load(Ordering::SeqCst)
    }

    pub fn counter(&self) -> Arc<AtomicUsize> {
        self.count.clone()
    }
}

impl Transport for CountingTransport {
    fn send(&self, req: &BackendRequest) -> Result<Vec<u8>, BackendError> {
        self.count.fetch_add(1, Ordering::SeqCst);
        self.inner.send(req)
    }
}
