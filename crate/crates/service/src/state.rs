use std::sync::{Arc, RwLock};
use std::time::Instant;

use cardiodx_core::ModelEnvelope;

use crate::auth::{SessionStore, UserStore};

pub const DEFAULT_UPLOAD_LIMIT: usize = 1024 * 1024;
pub const DEFAULT_TOKEN_TTL: std::time::Duration = std::time::Duration::from_secs(24 * 3600);

/// Shared, cheaply clonable handle to everything a request needs.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    users: UserStore,
    sessions: SessionStore,
    model: RwLock<Option<Arc<ModelEnvelope>>>,
    upload_limit: usize,
    started: Instant,
}

impl AppState {
    pub fn new(
        users: UserStore,
        model: Option<ModelEnvelope>,
        token_ttl: std::time::Duration,
        upload_limit: usize,
    ) -> Self {
        Self {
            inner: Arc::new(Inner {
                users,
                sessions: SessionStore::new(token_ttl),
                model: RwLock::new(model.map(Arc::new)),
                upload_limit,
                started: Instant::now(),
            }),
        }
    }

    pub fn users(&self) -> &UserStore {
        &self.inner.users
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.inner.sessions
    }

    pub fn upload_limit(&self) -> usize {
        self.inner.upload_limit
    }

    pub fn uptime(&self) -> std::time::Duration {
        self.inner.started.elapsed()
    }

    /// The live model. Callers keep the returned reference for the whole
    /// request, so a concurrent swap never mixes two models.
    pub fn model(&self) -> Option<Arc<ModelEnvelope>> {
        self.inner.model.read().expect("model lock poisoned").clone()
    }

    /// Replaces the served model in one step.
    pub fn set_model(&self, model: Option<ModelEnvelope>) {
        *self.inner.model.write().expect("model lock poisoned") = model.map(Arc::new);
    }
}
