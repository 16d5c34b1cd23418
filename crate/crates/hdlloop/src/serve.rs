//! Local server for the steering UI: static assets plus a websocket that
//! streams run events and accepts operator input.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::header;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use hdlloop_core::outcome::AbortReason;
use serde::Deserialize;
use tokio::sync::broadcast;

use crate::driver::{DriverError, Envelope, Event, EventSink, Events, FeedbackProvider, FeedbackRequest, OperatorAction};
use crate::runner::{run_single, SuiteRunConfig};
use crate::suite::Suite;

pub const INDEX_HTML: &str = include_str!("../assets/ui/index.html");
pub const APP_JS: &str = include_str!("../assets/ui/app.js");

/// Messages the UI sends.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Inbound {
    Start {
        benchmark: String,
        #[serde(default = "default_trial")]
        trial: String,
    },
    Feedback {
        text: String,
    },
    Abort {
        #[serde(default)]
        wrote_hdl: bool,
    },
}

fn default_trial() -> String {
    "T1".into()
}

struct BroadcastSink(broadcast::Sender<String>);

impl EventSink for BroadcastSink {
    fn emit(&self, e: Envelope) {
        let _ = self.0.send(serde_json::to_string(&e).expect("events serialize"));
    }
}

/// Blocks the run until the UI answers a feedback request.
struct ChannelOperator(mpsc::Receiver<OperatorAction>);

impl FeedbackProvider for ChannelOperator {
    fn request(&mut self, _req: &FeedbackRequest<'_>) -> Result<OperatorAction, DriverError> {
        self.0.recv().map_err(|_| DriverError::Session(crate::session::SessionError::Closed))
    }
}

pub struct AppState {
    suite: Suite,
    cfg: SuiteRunConfig,
    events: broadcast::Sender<String>,
    operator: Mutex<Option<mpsc::Sender<OperatorAction>>>,
    busy: AtomicBool,
}

impl AppState {
    pub fn new(suite: Suite, cfg: SuiteRunConfig) -> Arc<AppState> {
        let (events, _) = broadcast::channel(1024);
        Arc::new(AppState { suite, cfg, events, operator: Mutex::new(None), busy: AtomicBool::new(false) })
    }

    fn notice(&self, event: Event) {
        BroadcastSink(self.events.clone()).emit(Envelope { v: crate::driver::EVENT_VERSION, seq: 0, event });
    }

    fn handle(self: &Arc<Self>, msg: Inbound) {
        match msg {
            Inbound::Start { benchmark, trial } => {
                if self.busy.swap(true, Ordering::SeqCst) {
                    self.notice(Event::Error { message: "a run is already in progress".into(), environment: false });
                    return;
                }
                let (tx, rx) = mpsc::channel();
                *self.operator.lock().expect("operator lock") = Some(tx);
                let state = self.clone();
                tokio::task::spawn_blocking(move || {
                    let sink = BroadcastSink(state.events.clone());
                    let r = run_single(&state.suite, &state.cfg, &benchmark, &trial, Some(Box::new(ChannelOperator(rx))), &sink);
                    if let Err(e) = r {
                        state.notice(Event::Error { message: e.to_string(), environment: false });
                    }
                    *state.operator.lock().expect("operator lock") = None;
                    state.busy.store(false, Ordering::SeqCst);
                    Events::new(&sink).emit(Event::Idle);
                });
            }
            Inbound::Feedback { text } => self.forward(OperatorAction::Feedback(text)),
            Inbound::Abort { wrote_hdl } => {
                self.forward(OperatorAction::Abort(if wrote_hdl { AbortReason::WroteHdl } else { AbortReason::Other }))
            }
        }
    }

    fn forward(&self, action: OperatorAction) {
        let sent = self.operator.lock().expect("operator lock").as_ref().is_some_and(|tx| tx.send(action).is_ok());
        if !sent {
            self.notice(Event::Error { message: "no run is waiting for operator input".into(), environment: false });
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/", get(|| async { Html(INDEX_HTML) }))
        .route("/app.js", get(|| async { ([(header::CONTENT_TYPE, "text/javascript")], APP_JS) }))
        .route("/ws", get(ws_handler))
        .with_state(state)
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<Arc<AppState>>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, state))
}

async fn client(socket: WebSocket, state: Arc<AppState>) {
    let (mut tx, mut rx) = socket.split();
    let mut events = state.events.subscribe();
    if !state.busy.load(Ordering::SeqCst) {
        let idle = Envelope { v: crate::driver::EVENT_VERSION, seq: 0, event: Event::Idle };
        if tx.send(Message::Text(serde_json::to_string(&idle).expect("events serialize"))).await.is_err() {
            return;
        }
    }
    let mut outbound = tokio::spawn(async move {
        loop {
            match events.recv().await {
                Ok(text) => {
                    if tx.send(Message::Text(text)).await.is_err() {
                        break;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => tracing::warn!("websocket client lagged by {n} events"),
                Err(broadcast::error::RecvError::Closed) => break,
            }
        }
    });
    loop {
        tokio::select! {
            _ = &mut outbound => break,
            msg = rx.next() => match msg {
                Some(Ok(Message::Text(t))) => match serde_json::from_str::<Inbound>(&t) {
                    Ok(m) => state.handle(m),
                    Err(e) => state.notice(Event::Error { message: format!("bad message: {e}"), environment: false }),
                },
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
        }
    }
    outbound.abort();
}

pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("serving on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
