//! HTTP service over the busnet engine: dataset ingestion, analytics, search
//! sessions with server-sent progress, and conflict resolution sessions.

pub mod api;
pub mod config;
pub mod error;
pub mod sessions;
pub mod state;

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use busnet_core::network::load_dataset_dir;
use busnet_core::NetworkError;
use thiserror::Error;
use tokio::net::TcpListener;

pub use api::router;
pub use config::ServiceConfig;
pub use error::{ApiError, ErrorBody};
pub use state::AppState;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot load dataset: {0}")]
    Dataset(#[from] NetworkError),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A bound, not yet serving, service.
pub struct Server {
    listener: TcpListener,
    state: Arc<AppState>,
}

impl Server {
    /// Validates the configuration, loads the configured dataset and binds the port.
    pub async fn bind(config: ServiceConfig) -> Result<Self, ServiceError> {
        config.validate().map_err(ServiceError::Config)?;
        let state = Arc::new(AppState::new(config));
        if let Some(dir) = &state.config.dataset_dir {
            let dir = dir.clone();
            let transfer = state.config.transfer;
            let (network, report) = tokio::task::spawn_blocking(move || load_dataset_dir(&dir, &transfer))
                .await
                .map_err(|e| ServiceError::Config(e.to_string()))??;
            state.add_dataset(Arc::new(network), report);
        }
        let addr = state.config.listen;
        let listener = TcpListener::bind(addr)
            .await
            .map_err(|source| ServiceError::Bind { addr, source })?;
        Ok(Self { listener, state })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    pub fn state(&self) -> &Arc<AppState> {
        &self.state
    }

    /// Serves until `shutdown` resolves.
    pub async fn run_until(self, shutdown: impl std::future::Future<Output = ()> + Send + 'static) -> Result<(), ServiceError> {
        let state = self.state.clone();
        let sweeper = tokio::spawn(async move {
            let period = (state.config.idle_timeout() / 4).clamp(Duration::from_millis(50), Duration::from_secs(60));
            let mut tick = tokio::time::interval(period);
            loop {
                tick.tick().await;
                state.evict_idle();
            }
        });
        let result = axum::serve(self.listener, router(self.state)).with_graceful_shutdown(shutdown).await;
        sweeper.abort();
        Ok(result?)
    }

    pub async fn run(self) -> Result<(), ServiceError> {
        self.run_until(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    }
}

/// Binds and serves until interrupted.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    Server::bind(config).await?.run().await
}
