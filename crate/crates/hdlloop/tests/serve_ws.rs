mod common;

use std::fs;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use hdlloop::runner::{BackendChoice, OperatorChoice, SuiteRunConfig};
use hdlloop::serve::{router, AppState};
use hdlloop::suite::Suite;
use hdlloop::toolchain::{ToolConfig, ToolMode};
use hdlloop_core::engine::LoopLimits;
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio_tungstenite::tungstenite::Message;

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn start_server(tmp: &std::path::Path) -> std::net::SocketAddr {
    let transcripts = tmp.join("transcripts/shift_register");
    fs::create_dir_all(&transcripts).unwrap();
    for n in [2, 3] {
        fs::copy(common::fixtures().join(format!("logs/loop/shift_register_T{n}.ndjson")), transcripts.join(format!("T{n}.ndjson"))).unwrap();
    }
    let cfg = SuiteRunConfig {
        out_dir: tmp.join("out"),
        trials: 1,
        limits: LoopLimits::default(),
        tool_mode: ToolMode::Recorded,
        tools: ToolConfig::default(),
        backend: BackendChoice::Scripted(tmp.join("transcripts")),
        operator: OperatorChoice::Transcript,
        resume: false,
        jobs: 1,
    };
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let app = router(AppState::new(Suite::builtin(), cfg));
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    addr
}

async fn next_event(ws: &mut Ws) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(30), ws.next()).await.expect("event in time").unwrap().unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

async fn until(ws: &mut Ws, kind: &str) -> Value {
    loop {
        let e = next_event(ws).await;
        assert_eq!(e["v"], 1);
        assert_ne!(e["type"], "error", "{e}");
        if e["type"] == kind {
            return e;
        }
    }
}

async fn send(ws: &mut Ws, v: Value) {
    ws.send(Message::Text(v.to_string())).await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn escalation_round_trip_over_websocket() {
    let tmp = tempfile::tempdir().unwrap();
    let addr = start_server(tmp.path()).await;
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
    assert_eq!(next_event(&mut ws).await["type"], "idle");

    send(&mut ws, json!({"type": "start", "benchmark": "shift_register", "trial": "T2"})).await;
    let started = until(&mut ws, "started").await;
    assert_eq!(started["trial_label"], "T2");
    let req = until(&mut ws, "escalation_request").await;
    assert_eq!(req["level"], "SHF");
    send(&mut ws, json!({"type": "feedback", "text": "The shift goes the wrong way."})).await;
    let done = until(&mut ws, "terminal").await;
    assert_eq!(done["outcome"]["terminal"], "SHF");
    assert_eq!(done["outcome"]["compliant"], true);
    until(&mut ws, "idle").await;

    send(&mut ws, json!({"type": "start", "benchmark": "shift_register", "trial": "T3"})).await;
    until(&mut ws, "escalation_request").await;
    send(&mut ws, json!({"type": "abort", "wrote_hdl": true})).await;
    let done = until(&mut ws, "terminal").await;
    assert_eq!(done["outcome"]["terminal"], "FAIL");
}

#[tokio::test]
async fn input_without_a_run_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let addr = start_server(tmp.path()).await;
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();
    assert_eq!(next_event(&mut ws).await["type"], "idle");
    send(&mut ws, json!({"type": "feedback", "text": "hello"})).await;
    assert_eq!(next_event(&mut ws).await["type"], "error");
    ws.send(Message::Text("not json".into())).await.unwrap();
    let e = next_event(&mut ws).await;
    assert_eq!(e["type"], "error");
    assert_eq!(e["environment"], false);
}

async fn get(addr: std::net::SocketAddr, path: &str) -> String {
    let mut s = tokio::net::TcpStream::connect(addr).await.unwrap();
    s.write_all(format!("GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").as_bytes()).await.unwrap();
    let mut out = String::new();
    s.read_to_string(&mut out).await.unwrap();
    out
}

#[tokio::test]
async fn static_assets_are_served() {
    let tmp = tempfile::tempdir().unwrap();
    let addr = start_server(tmp.path()).await;
    let index = get(addr, "/").await;
    assert!(index.starts_with("HTTP/1.1 200"));
    assert!(index.contains("app.js"));
    let js = get(addr, "/app.js").await;
    assert!(js.contains("text/javascript"));
    assert!(js.contains("WebSocket"));
}
