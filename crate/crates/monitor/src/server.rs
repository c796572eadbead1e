use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};
use tokio::io::{AsyncBufReadExt, AsyncRead, AsyncWrite, AsyncWriteExt, BufReader};
use tokio::net::TcpListener;
use tokio::sync::watch;
use tokio::task::JoinSet;

use crate::config::{MonitorConfig, Transport};
use crate::service::Monitor;
use crate::sink::RecordSink;
use crate::MonitorError;

enum Listener {
    Stdio,
    Tcp(TcpListener),
    Http(TcpListener),
}

/// A monitor bound to its transport, ready to run.
pub struct Server {
    monitor: Arc<Monitor>,
    listener: Listener,
}

async fn bind(addr: &str) -> Result<TcpListener, MonitorError> {
    TcpListener::bind(addr).await.map_err(|source| MonitorError::Bind {
        addr: addr.to_string(),
        source,
    })
}

impl Server {
    /// Loads the models, opens the sink and binds the transport. Any failure
    /// here is a startup error.
    pub async fn bind(config: &MonitorConfig) -> Result<Self, MonitorError> {
        let detector = config.load_detector()?;
        let sink = RecordSink::open(&config.sink)?;
        Self::with_monitor(Arc::new(Monitor::new(detector, sink)), &config.transport).await
    }

    pub async fn with_monitor(monitor: Arc<Monitor>, transport: &Transport) -> Result<Self, MonitorError> {
        let listener = match transport {
            Transport::Stdio => Listener::Stdio,
            Transport::Tcp { addr } => Listener::Tcp(bind(addr).await?),
            Transport::Http { addr } => Listener::Http(bind(addr).await?),
        };
        Ok(Self { monitor, listener })
    }

    pub fn local_addr(&self) -> Option<SocketAddr> {
        match &self.listener {
            Listener::Stdio => None,
            Listener::Tcp(l) | Listener::Http(l) => l.local_addr().ok(),
        }
    }

    pub fn monitor(&self) -> Arc<Monitor> {
        self.monitor.clone()
    }

    /// Serves until `shutdown` resolves (or stdin closes), then lets open
    /// connections finish their current request and syncs the sink.
    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), MonitorError> {
        let monitor = self.monitor;
        match self.listener {
            Listener::Stdio => {
                let (_tx, rx) = watch::channel(false);
                tokio::select! {
                    _ = shutdown => {}
                    _ = serve_lines(tokio::io::stdin(), tokio::io::stdout(), monitor.clone(), rx) => {}
                }
            }
            Listener::Tcp(listener) => {
                let (tx, rx) = watch::channel(false);
                let mut tasks = JoinSet::new();
                tokio::pin!(shutdown);
                loop {
                    tokio::select! {
                        _ = &mut shutdown => break,
                        accepted = listener.accept() => match accepted {
                            Ok((stream, peer)) => {
                                tracing::debug!(%peer, "connection opened");
                                let (r, w) = stream.into_split();
                                tasks.spawn(serve_lines(r, w, monitor.clone(), rx.clone()));
                            }
                            Err(e) => tracing::warn!(error = %e, "accept failed"),
                        },
                    }
                }
                let _ = tx.send(true);
                while tasks.join_next().await.is_some() {}
            }
            Listener::Http(listener) => {
                axum::serve(listener, router(monitor.clone()))
                    .with_graceful_shutdown(shutdown)
                    .await?;
            }
        }
        monitor.sync()?;
        tracing::info!("monitor stopped, record sink synced");
        Ok(())
    }
}

/// Answers JSON-lines requests in order until EOF or `stop` flips.
async fn serve_lines<R, W>(reader: R, mut writer: W, monitor: Arc<Monitor>, mut stop: watch::Receiver<bool>)
where
    R: AsyncRead + Unpin,
    W: AsyncWrite + Unpin,
{
    let mut lines = BufReader::new(reader).lines();
    while !*stop.borrow() {
        let line = tokio::select! {
            _ = stop.changed() => break,
            line = lines.next_line() => line,
        };
        let line = match line {
            Ok(Some(l)) if l.trim().is_empty() => continue,
            Ok(Some(l)) => l,
            Ok(None) => break,
            Err(e) => {
                tracing::warn!(error = %e, "read failed");
                break;
            }
        };
        let m = monitor.clone();
        let response = match tokio::task::spawn_blocking(move || m.handle_line(&line)).await {
            Ok(r) => r,
            Err(e) => {
                tracing::error!(error = %e, "request handler panicked");
                break;
            }
        };
        let mut out = serde_json::to_vec(&response).expect("responses serialize");
        out.push(b'\n');
        if writer.write_all(&out).await.is_err() || writer.flush().await.is_err() {
            break;
        }
    }
}

/// HTTP front: `POST /detect` takes and returns the same JSON objects as the
/// line protocol; `GET /health` reports the detector and record count.
pub fn router(monitor: Arc<Monitor>) -> Router {
    Router::new()
        .route("/detect", post(detect))
        .route("/health", get(health))
        .with_state(monitor)
}

async fn detect(State(monitor): State<Arc<Monitor>>, body: String) -> (StatusCode, Json<Value>) {
    let response = tokio::task::spawn_blocking(move || monitor.handle_line(&body))
        .await
        .expect("request handler panicked");
    let status = if response.error.is_some() {
        StatusCode::BAD_REQUEST
    } else {
        StatusCode::OK
    };
    (
        status,
        Json(serde_json::to_value(response).expect("responses serialize")),
    )
}

async fn health(State(monitor): State<Arc<Monitor>>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "detector": monitor.detector().kind(),
        "next_sequence": monitor.next_sequence(),
    }))
}
