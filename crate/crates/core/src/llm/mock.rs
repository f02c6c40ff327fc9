use std::collections::VecDeque;
use std::sync::Mutex;

use super::{LlmBackend, ProviderRequest, ProviderResponse};
use crate::error::{ProviderError, ProviderErrorKind};

pub type Scripted = Result<ProviderResponse, ProviderError>;

/// Replays a fixed script of answers and records every request.
#[derive(Debug, Default)]
pub struct MockProvider {
    script: Mutex<VecDeque<Scripted>>,
    requests: Mutex<Vec<ProviderRequest>>,
    fallback: Option<ProviderResponse>,
}

impl MockProvider {
    pub fn new(script: impl IntoIterator<Item = ProviderResponse>) -> Self {
        Self::with_results(script.into_iter().map(Ok))
    }

    /// Script that may also contain provider failures.
    pub fn with_results(script: impl IntoIterator<Item = Scripted>) -> Self {
        Self { script: Mutex::new(script.into_iter().collect()), requests: Mutex::default(), fallback: None }
    }

    /// Answer with `r` once the script runs out instead of failing.
    pub fn with_fallback(mut self, r: ProviderResponse) -> Self {
        self.fallback = Some(r);
        self
    }

    pub fn push(&self, r: Scripted) {
        self.script.lock().expect("mock lock").push_back(r);
    }

    pub fn requests(&self) -> Vec<ProviderRequest> {
        self.requests.lock().expect("mock lock").clone()
    }

    pub fn remaining(&self) -> usize {
        self.script.lock().expect("mock lock").len()
    }
}

impl LlmBackend for MockProvider {
    fn complete(&self, req: &ProviderRequest) -> Result<ProviderResponse, ProviderError> {
        self.requests.lock().expect("mock lock").push(req.clone());
        self.script
            .lock()
            .expect("mock lock")
            .pop_front()
            .or_else(|| self.fallback.clone().map(Ok))
            .unwrap_or_else(|| Err(ProviderError::new(ProviderErrorKind::Exhausted, "mock script exhausted")))
    }
}
