//! Live session service: a tick thread owns the [`Session`]; WebSocket
//! handlers forward client frames as commands and relay published frames.
//!
//! Route: `GET /ws`. When a token is configured the client must send it as
//! `?token=` or `Authorization: Bearer`.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use asv_fallback::selector::backend::ModelBackend;
use asv_fallback::session::{
    parse_client_message, Command, SelectionMode, ServerFrame, Session, SessionConfig, SessionScene, SessionSelector,
};
use asv_fallback::suite::{BackendRole, BackendSpec};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, mpsc};

/// `serve-session` configuration file.
///
/// ```toml
/// [selector]
/// kind = "mock"
/// [session]
/// tick_hz = 20
/// auto_alert = false
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeConfig {
    #[serde(default)]
    pub selector: Option<BackendSpec>,
    #[serde(default)]
    pub session: SessionConfig,
}

impl ServeConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("read {}", path.display()))?;
        let mut cfg: Self = if path.extension().is_some_and(|e| e == "json") { serde_json::from_str(&text)? } else { toml::from_str(&text)? };
        if let Some(BackendSpec::Replay { path: p }) = &mut cfg.selector {
            if p.is_relative() {
                *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
            }
        }
        cfg.session.validate()?;
        Ok(cfg)
    }

    pub fn selector_backend(&self) -> Result<Arc<dyn ModelBackend>> {
        let spec = self.selector.clone().unwrap_or(BackendSpec::Mock);
        Ok(spec.build("selector", BackendRole::Selector, Path::new("."))?)
    }
}

pub struct ServeOptions {
    pub token: Option<String>,
    pub event_log: Option<PathBuf>,
    /// Stop after this many ticks.
    pub max_ticks: Option<u64>,
}

#[derive(Clone)]
struct AppState {
    commands: mpsc::UnboundedSender<Command>,
    frames: broadcast::Sender<Arc<str>>,
    overlay: Arc<Mutex<Option<Arc<str>>>>,
    next_client: Arc<AtomicU64>,
    token: Option<Arc<str>>,
}

pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: Arc<AtomicBool>,
    ticker: Option<std::thread::JoinHandle<Result<()>>>,
    http: tokio::task::JoinHandle<()>,
}

impl ServerHandle {
    /// Stops the tick loop and the listener.
    pub fn shutdown(mut self) -> Result<()> {
        self.stop.store(true, Ordering::SeqCst);
        self.http.abort();
        match self.ticker.take() {
            Some(t) => t.join().map_err(|_| anyhow::anyhow!("tick thread panicked"))?,
            None => Ok(()),
        }
    }

    /// Waits for the tick loop to end (`max_ticks` or shutdown).
    pub async fn wait(mut self) -> Result<()> {
        let t = self.ticker.take();
        let r = match t {
            Some(t) => tokio::task::spawn_blocking(move || t.join()).await?.map_err(|_| anyhow::anyhow!("tick thread panicked"))?,
            None => Ok(()),
        };
        self.http.abort();
        r
    }
}

/// Starts the session on `listener`. Selector calls run in the background so
/// the tick rate holds while the model answers.
pub async fn serve(listener: tokio::net::TcpListener, scene: SessionScene, cfg: SessionConfig, backend: Arc<dyn ModelBackend>, anomalous: bool, opts: ServeOptions) -> Result<ServerHandle> {
    let selector = SessionSelector { backend, mode: SelectionMode::Background };
    let session = Session::with_monitor_verdict(scene, cfg, selector, anomalous)?;
    let (cmd_tx, cmd_rx) = mpsc::unbounded_channel();
    let (frames, _) = broadcast::channel(64);
    let state = AppState {
        commands: cmd_tx,
        frames: frames.clone(),
        overlay: Arc::new(Mutex::new(None)),
        next_client: Arc::new(AtomicU64::new(1)),
        token: opts.token.map(Into::into),
    };
    let stop = Arc::new(AtomicBool::new(false));
    let ticker = {
        let (stop, overlay) = (Arc::clone(&stop), Arc::clone(&state.overlay));
        let (event_log, max_ticks) = (opts.event_log, opts.max_ticks);
        std::thread::Builder::new()
            .name("session-tick".into())
            .spawn(move || tick_loop(session, cmd_rx, frames, overlay, stop, event_log, max_ticks))?
    };
    let addr = listener.local_addr()?;
    let app = Router::new().route("/ws", get(ws_handler)).with_state(state);
    let http = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!(error = %e, "http server stopped");
        }
    });
    tracing::info!(%addr, "session listening on /ws");
    Ok(ServerHandle { addr, stop, ticker: Some(ticker), http })
}

fn tick_loop(
    mut session: Session,
    mut commands: mpsc::UnboundedReceiver<Command>,
    frames: broadcast::Sender<Arc<str>>,
    overlay: Arc<Mutex<Option<Arc<str>>>>,
    stop: Arc<AtomicBool>,
    event_log: Option<PathBuf>,
    max_ticks: Option<u64>,
) -> Result<()> {
    let mut log = match &event_log {
        Some(p) => Some(std::io::BufWriter::new(
            std::fs::OpenOptions::new().create(true).append(true).open(p).with_context(|| format!("open {}", p.display()))?,
        )),
        None => None,
    };
    let period = Duration::from_secs_f64(session.config().dt());
    let mut next = Instant::now();
    let mut logged = 0usize;
    while !stop.load(Ordering::SeqCst) && max_ticks.is_none_or(|m| session.tick_count() < m) {
        while let Ok(cmd) = commands.try_recv() {
            session.enqueue(cmd);
        }
        let out = session.tick()?;
        if let Some(o) = out.overlay {
            let text: Arc<str> = ServerFrame::Overlay(o).to_json().into();
            *overlay.lock().expect("overlay lock") = Some(Arc::clone(&text));
            let _ = frames.send(text);
        }
        if !session.phase().alert_active() {
            *overlay.lock().expect("overlay lock") = None;
        }
        let _ = frames.send(ServerFrame::State(out.state).to_json().into());
        if let Some(w) = log.as_mut() {
            let new = &session.events()[logged..];
            asv_fallback::session::write_event_log(new, &mut *w)?;
            w.flush()?;
            logged = session.events().len();
        }
        next += period;
        let now = Instant::now();
        if next > now {
            std::thread::sleep(next - now);
        } else {
            next = now;
        }
    }
    Ok(())
}

#[derive(Deserialize)]
struct WsQuery {
    token: Option<String>,
}

fn authorized(state: &AppState, query: &WsQuery, headers: &HeaderMap) -> bool {
    let Some(expected) = state.token.as_deref() else { return true };
    if query.token.as_deref() == Some(expected) {
        return true;
    }
    headers
        .get(axum::http::header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .is_some_and(|t| t == expected)
}

async fn ws_handler(ws: WebSocketUpgrade, Query(query): Query<WsQuery>, headers: HeaderMap, State(state): State<AppState>) -> Response {
    if !authorized(&state, &query, &headers) {
        return (StatusCode::UNAUTHORIZED, "missing or wrong token").into_response();
    }
    ws.on_upgrade(move |socket| client(socket, state))
}

async fn client(socket: WebSocket, state: AppState) {
    let id = state.next_client.fetch_add(1, Ordering::SeqCst);
    tracing::info!(client = id, "client connected");
    let (mut tx, mut rx) = socket.split();
    let mut frames = state.frames.subscribe();
    let pending_overlay = state.overlay.lock().expect("overlay lock").clone();

    let sender = tokio::spawn(async move {
        if let Some(o) = pending_overlay {
            if tx.send(Message::Text(o.as_ref().into())).await.is_err() {
                return;
            }
        }
        loop {
            match frames.recv().await {
                Ok(text) => {
                    if tx.send(Message::Text(text.as_ref().into())).await.is_err() {
                        break;
                    }
                }
                // slow viewer: drop stale frames and continue with the newest
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => break,
            }
        }
    });

    while let Some(Ok(msg)) = rx.next().await {
        let cmd = match msg {
            Message::Text(text) => match parse_client_message(text.as_str()) {
                Ok(m) => Command::from_message(id, m),
                Err(reason) => Command::Unrecognized { client: id, reason },
            },
            Message::Binary(_) => Command::Unrecognized { client: id, reason: "binary frames are not supported".into() },
            Message::Close(_) => break,
            _ => continue,
        };
        if state.commands.send(cmd).is_err() {
            break;
        }
    }
    let _ = state.commands.send(Command::Disconnect { client: id });
    sender.abort();
    tracing::info!(client = id, "client disconnected");
}
