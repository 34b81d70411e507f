//! REST service that diagnoses patients with a stored model envelope.

pub mod auth;
pub mod error;
pub mod routes;
pub mod state;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

pub use error::ApiError;
pub use routes::{router, BatchCounts, BatchReport, ModelSnapshot, PredictionResult};
pub use state::{AppState, DEFAULT_TOKEN_TTL, DEFAULT_UPLOAD_LIMIT};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub model_path: Option<PathBuf>,
    pub users_file: PathBuf,
    pub bind: SocketAddr,
    pub token_ttl: Duration,
    pub upload_limit: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Auth(#[from] auth::AuthError),
    #[error("cannot load model: {0}")]
    Model(#[from] cardiodx_core::Error),
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Loads users and the model from `config`.
pub fn build_state(config: &ServiceConfig) -> Result<AppState, ServeError> {
    let users = auth::UserStore::load(&config.users_file)?;
    if users.is_empty() {
        log::warn!("users file {} has no users; nobody can log in", config.users_file.display());
    }
    let model = match &config.model_path {
        Some(p) => {
            let env = cardiodx_core::load_model(p)?;
            log::info!("loaded {} model from {}", env.model_type(), p.display());
            Some(env)
        }
        None => {
            log::warn!("no model configured; prediction endpoints will answer 503");
            None
        }
    };
    Ok(AppState::new(users, model, config.token_ttl, config.upload_limit))
}

/// Serves until ctrl-c.
pub async fn serve(config: ServiceConfig) -> Result<(), ServeError> {
    let state = build_state(&config)?;
    let listener = tokio::net::TcpListener::bind(config.bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            log::info!("shutting down");
        })
        .await?;
    Ok(())
}
