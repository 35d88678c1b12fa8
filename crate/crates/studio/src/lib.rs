//! The storybot studio service: sessions that carry a user from story to
//! goals to a block program running on the simulator and a robot, with every
//! interaction recorded in an append-only activity log.

pub mod http;
pub mod service;
pub mod session;
pub mod store;

#[cfg(doctest)]
mod book;

pub use http::{router, Cors};
pub use service::{ApiError, Pacing, RunResult, Studio, StudioConfig};
pub use session::{ActivityEvent, EventBody, Phase, RunMode, Session};
pub use store::{StorageError, Store};

use std::net::SocketAddr;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
}

/// A running service bound to a local port.
#[derive(Debug)]
pub struct RunningService {
    pub addr: SocketAddr,
    pub studio: Arc<Studio>,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<()>,
}

impl RunningService {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub async fn shutdown(mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        let _ = (&mut self.task).await;
    }

    pub async fn wait(self) {
        let _ = self.task.await;
    }
}

/// Load sessions from storage and serve the API.
pub async fn serve(addr: SocketAddr, config: StudioConfig, cors: &Cors) -> Result<RunningService, ServeError> {
    let studio = Arc::new(Studio::open(config)?);
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })?;
    let addr = listener.local_addr().map_err(|source| ServeError::Bind { addr, source })?;
    let app = router(studio.clone(), cors);
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        let _ = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stopped.await;
            })
            .await;
    });
    Ok(RunningService {
        addr,
        studio,
        stop: Some(stop),
        task,
    })
}
