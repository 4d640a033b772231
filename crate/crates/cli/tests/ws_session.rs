use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use asv_fallback::scenario::load_scenario;
use asv_fallback::selector::ScriptedBackend;
use asv_fallback::session::{read_event_log, replay, SessionConfig, SessionEvent, SessionScene};
use asv_fallback_cli::server::{serve, ServeOptions};
use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;

fn scene() -> SessionScene {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/corpus/s01-open.scene.json");
    SessionScene::from_scenario(&load_scenario(&p).unwrap()).unwrap()
}

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn next_json(ws: &mut Ws) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next()).await.expect("frame within 10 s").unwrap().unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(t.as_str()).unwrap();
        }
    }
}

/// Reads frames until `pred` holds, returning every frame seen.
async fn until(ws: &mut Ws, pred: impl Fn(&Value) -> bool) -> Vec<Value> {
    let mut seen = Vec::new();
    for _ in 0..2000 {
        let v = next_json(ws).await;
        let done = pred(&v);
        seen.push(v);
        if done {
            return seen;
        }
    }
    panic!("condition not reached");
}

fn has_event(frame: &Value, name: &str) -> bool {
    frame["events"].as_array().is_some_and(|es| es.iter().any(|e| e["event"] == name))
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn websocket_protocol_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let log_path = dir.path().join("events.jsonl");
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let cfg = SessionConfig { tick_hz: 50.0, ..Default::default() };
    let opts = ServeOptions { token: Some("s3cret".into()), event_log: Some(log_path.clone()), max_ticks: Some(400) };
    let handle = serve(listener, scene(), cfg.clone(), Arc::new(ScriptedBackend::choosing(1)), false, opts).await.unwrap();
    let url = format!("ws://{}/ws", handle.addr);

    assert!(tokio_tungstenite::connect_async(url.as_str()).await.is_err(), "token required");
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("{url}?token=s3cret")).await.unwrap();

    let first = until(&mut ws, |v| v["type"] == "state").await.pop().unwrap();
    assert_eq!(first["phase"], "nominal");
    assert_eq!(first["mode"], "autonomy");
    assert!(first.get("candidates").is_none());
    for key in ["tick", "t", "alpha"] {
        assert!(first[key].is_number(), "{key}");
    }
    for key in ["north", "east", "heading", "speed"] {
        assert!(first["pose"][key].is_number(), "{key}");
    }

    ws.send(Message::text(json!({"type": "reboot"}).to_string())).await.unwrap();
    let seen = until(&mut ws, |v| has_event(v, "input_rejected")).await;
    let rejected = seen.last().unwrap()["events"].as_array().unwrap().iter().find(|e| e["event"] == "input_rejected").unwrap().clone();
    assert_eq!(rejected["reason"], "unknown message type \"reboot\"");

    ws.send(Message::text(json!({"type": "alert"}).to_string())).await.unwrap();
    let seen = until(&mut ws, |v| v["type"] == "state" && v["phase"] == "executing").await;
    let overlays: Vec<&Value> = seen.iter().filter(|v| v["type"] == "overlay").collect();
    assert_eq!(overlays.len(), 1);
    assert!(overlays[0]["png_base64"].as_str().unwrap().starts_with("iVBORw0KGgo"));
    let exec = seen.last().unwrap();
    assert_eq!(exec["decision"]["choice_id"], 1);
    assert!(!exec["decision"]["path"].as_array().unwrap().is_empty());
    assert_eq!(exec["candidates"].as_array().unwrap().len(), 8);

    // a late viewer gets the current overlay first
    let (mut viewer, _) = tokio_tungstenite::connect_async(format!("{url}?token=s3cret")).await.unwrap();
    assert_eq!(next_json(&mut viewer).await["type"], "overlay");

    ws.send(Message::text(json!({"type": "joystick", "surge": 0.2, "sway": 0.0, "yaw": 0.5}).to_string())).await.unwrap();
    let seen = until(&mut ws, |v| has_event(v, "lease_granted")).await;
    assert!(seen.last().unwrap()["alpha"].as_f64().unwrap() > 0.0);
    ws.send(Message::text(json!({"type": "joystick", "surge": 0.0, "sway": 0.0, "yaw": 0.0}).to_string())).await.unwrap();
    viewer.send(Message::text(json!({"type": "joystick", "surge": 1.0, "sway": 0.0, "yaw": 0.0}).to_string())).await.unwrap();
    until(&mut ws, |v| has_event(v, "warning")).await;

    let mut ticks: Vec<u64> = Vec::new();
    let rest = until(&mut ws, |v| v["type"] == "state" && v["tick"] == 400).await;
    ticks.extend(rest.iter().filter(|v| v["type"] == "state").map(|v| v["tick"].as_u64().unwrap()));
    assert!(ticks.windows(2).all(|w| w[0] < w[1]));
    drop(ws);
    drop(viewer);
    handle.wait().await.unwrap();

    let log = read_event_log(&std::fs::read_to_string(&log_path).unwrap()).unwrap();
    let starts = log.iter().filter(|e| matches!(e.event, SessionEvent::SelectorStarted { .. })).count();
    assert_eq!(starts, 1);
    let rebuilt = replay(scene(), cfg, &log, 400).unwrap();
    assert_eq!(rebuilt.events(), &log[..]);
}
