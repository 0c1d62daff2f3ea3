mod common;

use aerocmd::wire::{code, Client, ClientError, ServerVersion};
use common::{soak, start_server, start_server_with};
use serde_json::{json, Value};
use std::io::{Read, Write};
use std::time::Duration;
use tokio_tungstenite::tungstenite::{connect, Message};

fn client(server: &aerocmd::wire::ServerHandle) -> Client {
    Client::connect(&server.tcp_addr().to_string(), Duration::from_secs(5)).unwrap()
}

fn remote_code(r: Result<Value, ClientError>) -> i64 {
    match r {
        Err(ClientError::Remote(e)) => e.code,
        other => panic!("expected a remote error, got {other:?}"),
    }
}

#[test]
fn soak_eight_connections_pipelined() {
    let server = start_server();
    let result = soak(server.tcp_addr(), 8, 1000);
    server.shutdown();
    result.unwrap();
}

#[test]
fn ping_reports_versions() {
    let server = start_server();
    let v = client(&server).ping().unwrap();
    assert_eq!(
        v,
        ServerVersion {
            server_version: 1,
            min_client_version: 1
        }
    );
    server.shutdown();
}

#[test]
fn task_lifecycle_over_tcp() {
    let server = start_server();
    let mut c = client(&server);
    let submitted = c
        .call("command.submit", json!({"program": "moveByVelocityAsync(1, 0, 0, duration=1)"}))
        .unwrap();
    let task_id = submitted["task_id"].as_str().unwrap().to_string();
    let joined = c.call("task.join", json!({"task_id": task_id})).unwrap();
    assert_eq!(joined["status"], "completed");
    let state = c.call("state.get", json!({})).unwrap();
    assert!((state["position"]["x"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(state["position"]["z"].as_f64().unwrap(), -3.0);
    let status = c.call("task.status", json!({"task_id": task_id})).unwrap();
    assert_eq!(status["status"], "completed");
    server.shutdown();
}

#[test]
fn queries_answer_inline() {
    let server = start_server();
    let mut c = client(&server);
    let gps = c.call("command.submit", json!({"program": "getGpsData()"})).unwrap();
    assert_eq!(gps["result"]["gps"]["gnss"]["geo_point"]["latitude"].as_f64(), Some(common::HOME_LAT));
    let img = c.call("image.get", json!({"camera": 0, "image_type": "depth"})).unwrap();
    assert!(img["png_base64"].as_str().unwrap().len() > 100);
    assert_eq!(img["metadata"]["image_type"], "depth");
    server.shutdown();
}

#[test]
fn error_codes() {
    let server = start_server();
    let mut c = client(&server);
    assert_eq!(remote_code(c.call("command.submit", json!({"program": "fly()"}))), code::PARSE);
    assert_eq!(
        remote_code(c.call("command.submit", json!({"program": "moveToPositionAsync(500, 0, -3, 2)"}))),
        code::VALIDATION
    );
    assert_eq!(remote_code(c.call("warp.engage", json!({}))), code::UNKNOWN_METHOD);
    assert_eq!(remote_code(c.call("task.status", json!({"task_id": "nope"}))), code::UNKNOWN_TASK);
    server.shutdown();

    let grounded = start_server_with(|o| o.sim.motion.auto_takeoff = false);
    let mut c = client(&grounded);
    assert_eq!(
        remote_code(c.call("command.submit", json!({"program": "moveByVelocityAsync(1, 0, 0, duration=1)"}))),
        code::NOT_AIRBORNE
    );
    grounded.shutdown();
}

#[test]
fn reset_returns_to_home() {
    let server = start_server();
    let mut c = client(&server);
    let t = c.call("command.submit", json!({"program": "moveToPositionAsync(5, 5, -5, 3)"})).unwrap();
    c.call("task.join", json!({"task_id": t["task_id"]})).unwrap();
    assert_eq!(c.call("sim.reset", json!({})).unwrap(), json!({"ok": true}));
    let state = c.call("state.get", json!({})).unwrap();
    assert_eq!(state["position"], json!({"x": 0.0, "y": 0.0, "z": 0.0}));
    assert_eq!(state["landed"], true);
    server.shutdown();
}

#[test]
fn telemetry_stream_is_monotone() {
    let server = start_server();
    let mut c = client(&server);
    let ack = c.call("telemetry.subscribe", json!({"hz": 200})).unwrap();
    assert_eq!(ack["hz"], 50.0);
    c.send("command.submit", json!({"program": "moveByVelocityAsync(1, 0, 0, duration=5)"})).unwrap();
    let mut last = f64::NEG_INFINITY;
    for _ in 0..5 {
        let ev = c.next_event().unwrap();
        assert_eq!(ev.channel, "telemetry");
        let t = ev.payload["sim_time"].as_f64().unwrap();
        assert!(t >= last);
        last = t;
        assert!(ev.payload["geo_point"]["latitude"].is_number());
    }
    server.shutdown();
}

#[test]
fn oversized_frame_closes_connection() {
    let server = start_server();
    let mut s = std::net::TcpStream::connect(server.tcp_addr()).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    s.write_all(&(17u32 << 20).to_be_bytes()).unwrap();
    let mut buf = [0u8; 16];
    assert_eq!(s.read(&mut buf).unwrap_or(0), 0);
    server.shutdown();
}

fn ws_call(ws: &mut tokio_tungstenite::tungstenite::WebSocket<impl Read + Write>, req: Value) -> Value {
    ws.send(Message::text(req.to_string())).unwrap();
    loop {
        match ws.read().unwrap() {
            Message::Text(t) => {
                let v: Value = serde_json::from_str(&t).unwrap();
                if v["id"] == req["id"] {
                    return v;
                }
            }
            Message::Ping(_) | Message::Pong(_) => {}
            other => panic!("unexpected websocket message {other:?}"),
        }
    }
}

#[test]
fn websocket_translate_and_ping() {
    let server = start_server();
    let url = format!("ws://{}", server.ws_addr().unwrap());
    let (mut ws, _) = connect(url).unwrap();

    let pong = ws_call(&mut ws, json!({"id": "a", "method": "ping"}));
    assert_eq!(pong["result"]["server_version"], 1);

    let t = ws_call(
        &mut ws,
        json!({"id": "b", "method": "translate", "params": {"utterance": "Move the drone forward 2 meters"}}),
    );
    assert_eq!(
        t["result"]["candidates"][0]["rendered"],
        "moveByVelocityAsync(2, 0, 0, duration=2)"
    );

    let none = ws_call(
        &mut ws,
        json!({"id": "c", "method": "translate", "params": {"utterance": "please compile my tax return"}}),
    );
    assert_eq!(none["result"]["candidates"], json!([]));
    assert!(none["result"]["best_score"].as_f64().unwrap() < 0.35);
    assert!(!none["result"]["nearest"].as_array().unwrap().is_empty());

    let bad = ws_call(&mut ws, json!({"id": "d", "method": "nope"}));
    assert_eq!(bad["error"]["code"], code::UNKNOWN_METHOD);

    let log = server.request_log();
    assert_eq!(log.len(), 4);
    assert!(log.iter().all(|r| r.transport == aerocmd::wire::Transport::Websocket));
    server.shutdown();
}

#[test]
fn requests_logged_in_arrival_order() {
    let server = start_server();
    let mut c = client(&server);
    c.ping().unwrap();
    c.call("gps.get", json!({})).unwrap();
    let log = server.request_log();
    let methods: Vec<_> = log.iter().map(|r| r.method.as_str()).collect();
    assert_eq!(methods, ["ping", "gps.get"]);
    assert!(log.windows(2).all(|w| w[0].seq < w[1].seq));
    server.shutdown();
}
