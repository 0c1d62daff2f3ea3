//! The simulation server. One thread owns the [`Simulator`] and applies
//! jobs in arrival order; connection handlers only forward requests to it and
//! relay replies, so every client sees one total order of submissions.

use super::frame::{encode_frame, FrameDecoder};
use super::message::{code, ErrorBody, Event, Message, Request, Response, MIN_CLIENT_VERSION, PROTOCOL_VERSION};
use super::payload::{image_json, query_json, telemetry};
use crate::dsl::{parse_program, ImageType, Program};
use crate::nl::{TranslateError, Translator};
use crate::sim::{SimConfig, Simulator, SubmitError, Submitted};
use futures_util::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fmt;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc as std_mpsc, Arc, Mutex};
use std::time::{Duration, Instant};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, oneshot};
use tokio_tungstenite::tungstenite::Message as WsMessage;

pub const DEFAULT_TCP_ADDR: &str = "127.0.0.1:41451";
pub const DEFAULT_WS_ADDR: &str = "127.0.0.1:41452";
pub const DEFAULT_TELEMETRY_HZ: f64 = 10.0;
pub const MAX_TELEMETRY_HZ: f64 = 50.0;

/// How simulated time relates to wall-clock time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimSpeed {
    /// Step only while a task is running, as fast as possible.
    Unlimited,
    /// Simulated seconds per wall-clock second.
    Factor(f64),
}

impl Default for SimSpeed {
    fn default() -> Self {
        SimSpeed::Factor(1.0)
    }
}

impl FromStr for SimSpeed {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "infinity" | "∞" | "unlimited" => Ok(SimSpeed::Unlimited),
            other => match other.parse::<f64>() {
                Ok(f) if f.is_infinite() && f > 0.0 => Ok(SimSpeed::Unlimited),
                Ok(f) if f > 0.0 && f.is_finite() => Ok(SimSpeed::Factor(f)),
                _ => Err(format!("sim speed must be a positive number or `inf`, got `{s}`")),
            },
        }
    }
}

impl fmt::Display for SimSpeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimSpeed::Unlimited => f.write_str("inf"),
            SimSpeed::Factor(x) => write!(f, "{x}"),
        }
    }
}

impl Serialize for SimSpeed {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SimSpeed {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(f) => f.to_string().parse(),
            Repr::Text(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

pub struct ServerOptions {
    pub tcp_addr: String,
    /// `None` disables the WebSocket endpoint.
    pub ws_addr: Option<String>,
    pub sim: SimConfig,
    pub speed: SimSpeed,
    /// Serves the `translate` method when present.
    pub translator: Option<Translator>,
    /// Appends each received request as a JSON line.
    pub request_log_path: Option<PathBuf>,
}

impl Default for ServerOptions {
    fn default() -> Self {
        Self {
            tcp_addr: DEFAULT_TCP_ADDR.into(),
            ws_addr: Some(DEFAULT_WS_ADDR.into()),
            sim: SimConfig::default(),
            speed: SimSpeed::default(),
            translator: None,
            request_log_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    Tcp,
    Websocket,
}

/// One received request, in server arrival order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedRequest {
    pub seq: u64,
    pub connection: u64,
    pub transport: Transport,
    pub id: String,
    pub method: String,
}

type Reply = oneshot::Sender<Result<Value, ErrorBody>>;

enum SimOp {
    Submit(Program),
    Status(String),
    Join(String),
    State,
    Gps,
    Image(u32, ImageType),
    Reset,
    Telemetry,
}

enum SimJob {
    Op(SimOp, Reply),
    Shutdown,
}

fn submit_error(e: SubmitError) -> ErrorBody {
    let code = match e {
        SubmitError::NotAirborne { .. } => code::NOT_AIRBORNE,
        SubmitError::ValidationRejected(_) | SubmitError::Image(_) => code::VALIDATION,
    };
    ErrorBody::new(code, e.to_string())
}

fn unknown_task(id: &str) -> ErrorBody {
    ErrorBody::new(code::UNKNOWN_TASK, format!("unknown task `{id}`"))
}

fn task_json(sim: &Simulator, id: &str, with_results: bool) -> Result<Value, ErrorBody> {
    let rec = sim.task(id).ok_or_else(|| unknown_task(id))?;
    let mut v = json!({ "task_id": rec.task_id, "status": rec.status });
    if with_results {
        v["results"] = rec.results.iter().map(query_json).collect();
    }
    Ok(v)
}

/// Applies one operation; `None` means the reply is deferred (a join on a
/// running task).
fn apply(sim: &mut Simulator, op: SimOp) -> Option<Result<Value, ErrorBody>> {
    Some(match op {
        SimOp::Submit(program) => match sim.submit_program(&program) {
            Ok(Submitted::Task(h)) => Ok(json!({ "task_id": h.task_id, "status": h.status })),
            Ok(Submitted::Query(q)) => Ok(json!({ "result": query_json(&q) })),
            Ok(Submitted::Reset(state)) => Ok(json!({ "reset": true, "state": state })),
            Err(e) => Err(submit_error(e)),
        },
        SimOp::Status(id) => task_json(sim, &id, false),
        SimOp::Join(id) => match sim.task(&id) {
            None => Err(unknown_task(&id)),
            Some(rec) if !rec.status.is_terminal() => return None,
            Some(_) => task_json(sim, &id, true),
        },
        SimOp::State => Ok(serde_json::to_value(sim.state()).expect("state serializes")),
        SimOp::Gps => Ok(serde_json::to_value(sim.gps()).expect("gps serializes")),
        SimOp::Image(camera, image_type) => sim
            .image(camera, image_type)
            .map(|img| image_json(&img))
            .map_err(|e| ErrorBody::new(code::VALIDATION, e.to_string())),
        SimOp::Reset => {
            sim.reset();
            Ok(json!({ "ok": true }))
        }
        SimOp::Telemetry => {
            let t = telemetry(&sim.state(), &sim.gps());
            Ok(serde_json::to_value(t).expect("telemetry serializes"))
        }
    })
}

fn sim_loop(mut sim: Simulator, jobs: std_mpsc::Receiver<SimJob>, speed: SimSpeed) {
    let mut joins: Vec<(String, Reply)> = Vec::new();
    let started = Instant::now();
    let dt = sim.config().dt;
    let mut ticks: u64 = 0;
    loop {
        let job = match speed {
            SimSpeed::Unlimited if sim.is_busy() => match jobs.try_recv() {
                Ok(j) => Some(j),
                Err(std_mpsc::TryRecvError::Empty) => None,
                Err(std_mpsc::TryRecvError::Disconnected) => return,
            },
            SimSpeed::Unlimited => match jobs.recv() {
                Ok(j) => Some(j),
                Err(_) => return,
            },
            SimSpeed::Factor(f) => {
                let due = started + Duration::from_secs_f64((ticks + 1) as f64 * dt / f);
                let now = Instant::now();
                if now >= due {
                    None
                } else {
                    match jobs.recv_timeout(due - now) {
                        Ok(j) => Some(j),
                        Err(std_mpsc::RecvTimeoutError::Timeout) => None,
                        Err(std_mpsc::RecvTimeoutError::Disconnected) => return,
                    }
                }
            }
        };
        match job {
            Some(SimJob::Shutdown) => return,
            Some(SimJob::Op(SimOp::Join(id), reply)) => match apply(&mut sim, SimOp::Join(id.clone())) {
                Some(r) => {
                    let _ = reply.send(r);
                }
                None => joins.push((id, reply)),
            },
            Some(SimJob::Op(op, reply)) => {
                let r = apply(&mut sim, op).expect("only joins defer");
                let _ = reply.send(r);
            }
            None => {
                sim.step();
                ticks += 1;
            }
        }
        if !joins.is_empty() {
            let mut waiting = Vec::with_capacity(joins.len());
            for (id, reply) in joins.drain(..) {
                match sim.task(&id) {
                    Some(rec) if rec.status.is_terminal() => {
                        let _ = reply.send(task_json(&sim, &id, true));
                    }
                    _ => waiting.push((id, reply)),
                }
            }
            joins = waiting;
        }
    }
}

struct Shared {
    jobs: std_mpsc::Sender<SimJob>,
    translator: Option<Translator>,
    sim_cfg: SimConfig,
    log: Arc<Mutex<Vec<LoggedRequest>>>,
    log_file: Option<Mutex<std::fs::File>>,
    seq: AtomicU64,
    next_conn: AtomicU64,
}

impl Shared {
    fn record(&self, connection: u64, transport: Transport, req: &Request) {
        let entry = LoggedRequest {
            seq: self.seq.fetch_add(1, Ordering::SeqCst),
            connection,
            transport,
            id: req.id.clone(),
            method: req.method.clone(),
        };
        if let Some(f) = &self.log_file {
            let mut f = f.lock().expect("log file lock");
            let line = serde_json::to_string(&entry).expect("log entry serializes");
            if let Err(e) = writeln!(f, "{line}") {
                tracing::warn!("request log write failed: {e}");
            }
        }
        self.log.lock().expect("request log lock").push(entry);
    }
}

#[derive(Deserialize)]
struct SubmitParams {
    program: String,
}

#[derive(Deserialize)]
struct TaskParams {
    task_id: String,
}

#[derive(Deserialize)]
struct ImageParams {
    #[serde(default)]
    camera: u32,
    #[serde(default = "scene")]
    image_type: String,
}

fn scene() -> String {
    "scene".into()
}

#[derive(Deserialize)]
struct TelemetryParams {
    #[serde(default = "default_hz")]
    hz: f64,
}

fn default_hz() -> f64 {
    DEFAULT_TELEMETRY_HZ
}

#[derive(Deserialize)]
struct TranslateParams {
    utterance: String,
    top_k: Option<usize>,
}

fn params<T: serde::de::DeserializeOwned>(p: &Value) -> Result<T, ErrorBody> {
    T::deserialize(p).map_err(|e| ErrorBody::new(code::PARSE, format!("bad params: {e}")))
}

/// Per-connection context handed to the dispatcher.
struct Conn {
    id: u64,
    transport: Transport,
    out: mpsc::UnboundedSender<Value>,
    tasks: Vec<tokio::task::JoinHandle<()>>,
}

impl Conn {
    fn send(&self, r: Response) {
        let _ = self.out.send(serde_json::to_value(r).expect("response serializes"));
    }

    /// Forwards `op` to the simulation thread now, so submission order matches
    /// arrival order, and relays the reply whenever it comes.
    fn forward(&mut self, shared: &Shared, id: String, op: SimOp) {
        let (tx, rx) = oneshot::channel();
        if shared.jobs.send(SimJob::Op(op, tx)).is_err() {
            self.send(Response::err(id, ErrorBody::new(code::INTERNAL, "simulator stopped")));
            return;
        }
        let out = self.out.clone();
        if self.tasks.len() >= 256 {
            self.tasks.retain(|t| !t.is_finished());
        }
        self.tasks.push(tokio::spawn(async move {
            let r = match rx.await {
                Ok(Ok(v)) => Response::ok(id, v),
                Ok(Err(e)) => Response::err(id, e),
                Err(_) => Response::err(id, ErrorBody::new(code::INTERNAL, "simulator stopped")),
            };
            let _ = out.send(serde_json::to_value(r).expect("response serializes"));
        }));
    }

    fn subscribe(&mut self, shared: &Arc<Shared>, hz: f64) {
        let period = Duration::from_secs_f64(1.0 / hz);
        let out = self.out.clone();
        let shared = Arc::clone(shared);
        self.tasks.push(tokio::spawn(async move {
            let mut tick = tokio::time::interval(period);
            tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            let mut last = f64::NEG_INFINITY;
            loop {
                tick.tick().await;
                let (tx, rx) = oneshot::channel();
                if shared.jobs.send(SimJob::Op(SimOp::Telemetry, tx)).is_err() {
                    return;
                }
                let Ok(Ok(payload)) = rx.await else { return };
                // Snapshots come from one thread in order; this guard keeps the
                // stream monotone even so.
                let t = payload["sim_time"].as_f64().unwrap_or(last);
                if t < last {
                    continue;
                }
                last = t;
                let ev = Event {
                    channel: "telemetry".into(),
                    payload,
                };
                if out.send(serde_json::to_value(ev).expect("event serializes")).is_err() {
                    return;
                }
            }
        }));
    }

    fn dispatch(&mut self, shared: &Arc<Shared>, v: Value) {
        let req = match Message::from_value(v.clone()) {
            Ok(Message::Request(r)) => r,
            Ok(_) => {
                tracing::debug!(conn = self.id, "ignoring non-request message");
                return;
            }
            Err(e) => {
                let id = v.get("id").and_then(Value::as_str).unwrap_or("").to_string();
                self.send(Response::err(id, ErrorBody::new(code::PARSE, format!("bad request: {e}"))));
                return;
            }
        };
        shared.record(self.id, self.transport, &req);
        let Request { id, method, params: p } = req;
        let immediate = |r: Result<Value, ErrorBody>| match r {
            Ok(v) => Response::ok(id.clone(), v),
            Err(e) => Response::err(id.clone(), e),
        };
        let op = match method.as_str() {
            "ping" => {
                let r = Ok(json!({ "server_version": PROTOCOL_VERSION, "min_client_version": MIN_CLIENT_VERSION }));
                return self.send(immediate(r));
            }
            "config.get" => {
                let c = &shared.sim_cfg;
                let r = Ok(json!({ "envelope": c.envelope, "home": c.home, "dt": c.dt, "server_version": PROTOCOL_VERSION }));
                return self.send(immediate(r));
            }
            "translate" => return self.send(immediate(translate(shared, &p))),
            "telemetry.subscribe" => {
                let r = params::<TelemetryParams>(&p).and_then(|t| {
                    if t.hz > 0.0 && t.hz.is_finite() {
                        Ok(t.hz.min(MAX_TELEMETRY_HZ))
                    } else {
                        Err(ErrorBody::new(code::PARSE, "hz must be positive"))
                    }
                });
                match r {
                    Ok(hz) => {
                        self.subscribe(shared, hz);
                        return self.send(immediate(Ok(json!({ "ok": true, "hz": hz }))));
                    }
                    Err(e) => return self.send(immediate(Err(e))),
                }
            }
            "command.submit" => params::<SubmitParams>(&p).and_then(|s| {
                parse_program(&s.program)
                    .map(SimOp::Submit)
                    .map_err(|e| ErrorBody::new(code::PARSE, e.to_string()))
            }),
            "task.status" => params::<TaskParams>(&p).map(|t| SimOp::Status(t.task_id)),
            "task.join" => params::<TaskParams>(&p).map(|t| SimOp::Join(t.task_id)),
            "state.get" => Ok(SimOp::State),
            "gps.get" => Ok(SimOp::Gps),
            "image.get" => params::<ImageParams>(&p).and_then(|i| {
                i.image_type
                    .parse::<ImageType>()
                    .map(|t| SimOp::Image(i.camera, t))
                    .map_err(|e| ErrorBody::new(code::PARSE, e.to_string()))
            }),
            "sim.reset" => Ok(SimOp::Reset),
            other => Err(ErrorBody::new(code::UNKNOWN_METHOD, format!("unknown method `{other}`"))),
        };
        match op {
            Ok(op) => self.forward(shared, id, op),
            Err(e) => self.send(Response::err(id, e)),
        }
    }

    fn close(self) {
        for t in self.tasks {
            t.abort();
        }
    }
}

fn translate(shared: &Shared, p: &Value) -> Result<Value, ErrorBody> {
    let t = params::<TranslateParams>(p)?;
    let translator = shared
        .translator
        .as_ref()
        .ok_or_else(|| ErrorBody::new(code::INTERNAL, "no corpus loaded on this server"))?;
    let top_k = t.top_k.unwrap_or(translator.config().top_k).max(1);
    match translator.translate_top(&t.utterance, top_k) {
        Ok(candidates) => {
            let best = candidates.first().map(|c| c.score).unwrap_or(0.0);
            Ok(json!({ "candidates": candidates, "best_score": best, "nearest": [] }))
        }
        Err(TranslateError::NoConfidentCandidate { best_score, nearest }) => {
            Ok(json!({ "candidates": [], "best_score": best_score, "nearest": nearest }))
        }
        Err(e) => Err(ErrorBody::new(code::INTERNAL, e.to_string())),
    }
}

async fn serve_tcp(shared: Arc<Shared>, stream: TcpStream) {
    let conn_id = shared.next_conn.fetch_add(1, Ordering::SeqCst);
    let _ = stream.set_nodelay(true);
    let (mut rd, mut wr) = stream.into_split();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<Value>();
    let writer = tokio::spawn(async move {
        while let Some(v) = out_rx.recv().await {
            let frame = match encode_frame(&v) {
                Ok(f) => f,
                Err(e) => {
                    tracing::warn!("dropping outgoing message: {e}");
                    continue;
                }
            };
            if wr.write_all(&frame).await.is_err() {
                return;
            }
        }
    });
    let mut conn = Conn {
        id: conn_id,
        transport: Transport::Tcp,
        out: out_tx,
        tasks: Vec::new(),
    };
    let mut decoder = FrameDecoder::new();
    let mut buf = vec![0u8; 64 * 1024];
    loop {
        let n = match rd.read(&mut buf).await {
            Ok(0) | Err(_) => break,
            Ok(n) => n,
        };
        match decoder.push(&buf[..n]) {
            Ok(values) => {
                for v in values {
                    conn.dispatch(&shared, v);
                }
            }
            Err(e) => {
                tracing::warn!(conn = conn_id, "closing connection: {e}");
                break;
            }
        }
    }
    conn.close();
    writer.abort();
}

async fn serve_ws(shared: Arc<Shared>, stream: TcpStream) {
    let conn_id = shared.next_conn.fetch_add(1, Ordering::SeqCst);
    let ws = match tokio_tungstenite::accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            tracing::debug!("websocket handshake failed: {e}");
            return;
        }
    };
    let (mut sink, mut source) = ws.split();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<Value>();
    let writer = tokio::spawn(async move {
        while let Some(v) = out_rx.recv().await {
            if sink.send(WsMessage::text(v.to_string())).await.is_err() {
                return;
            }
        }
    });
    let mut conn = Conn {
        id: conn_id,
        transport: Transport::Websocket,
        out: out_tx,
        tasks: Vec::new(),
    };
    while let Some(msg) = source.next().await {
        let text = match msg {
            Ok(WsMessage::Text(t)) => t.to_string(),
            Ok(WsMessage::Binary(b)) => match String::from_utf8(b.to_vec()) {
                Ok(t) => t,
                Err(_) => break,
            },
            Ok(WsMessage::Close(_)) | Err(_) => break,
            Ok(_) => continue,
        };
        match serde_json::from_str::<Value>(&text) {
            Ok(v) => conn.dispatch(&shared, v),
            Err(e) => {
                tracing::warn!(conn = conn_id, "closing websocket: malformed JSON: {e}");
                break;
            }
        }
    }
    conn.close();
    writer.abort();
}

/// A running server. Dropping the handle does not stop it; call
/// [`ServerHandle::shutdown`].
pub struct ServerHandle {
    tcp_addr: SocketAddr,
    ws_addr: Option<SocketAddr>,
    log: Arc<Mutex<Vec<LoggedRequest>>>,
    stop: Option<oneshot::Sender<()>>,
    jobs: std_mpsc::Sender<SimJob>,
    threads: Vec<std::thread::JoinHandle<()>>,
}

impl ServerHandle {
    pub fn tcp_addr(&self) -> SocketAddr {
        self.tcp_addr
    }

    pub fn ws_addr(&self) -> Option<SocketAddr> {
        self.ws_addr
    }

    /// Every request received so far, in arrival order.
    pub fn request_log(&self) -> Vec<LoggedRequest> {
        self.log.lock().expect("request log lock").clone()
    }

    /// Blocks until the server stops (it only stops through `shutdown`).
    pub fn wait(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    pub fn shutdown(mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        let _ = self.jobs.send(SimJob::Shutdown);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

/// Binds the endpoints and starts the server on background threads.
pub fn spawn(opts: ServerOptions) -> std::io::Result<ServerHandle> {
    let tcp = std::net::TcpListener::bind(&opts.tcp_addr)?;
    tcp.set_nonblocking(true)?;
    let ws = match &opts.ws_addr {
        Some(a) => {
            let l = std::net::TcpListener::bind(a)?;
            l.set_nonblocking(true)?;
            Some(l)
        }
        None => None,
    };
    let tcp_addr = tcp.local_addr()?;
    let ws_addr = ws.as_ref().map(|l| l.local_addr()).transpose()?;
    let log_file = match &opts.request_log_path {
        Some(p) => Some(Mutex::new(std::fs::OpenOptions::new().create(true).append(true).open(p)?)),
        None => None,
    };

    let (jobs_tx, jobs_rx) = std_mpsc::channel();
    let sim = Simulator::new(opts.sim.clone());
    let speed = opts.speed;
    let sim_thread = std::thread::Builder::new()
        .name("sim-loop".into())
        .spawn(move || sim_loop(sim, jobs_rx, speed))?;

    let log = Arc::new(Mutex::new(Vec::new()));
    let shared = Arc::new(Shared {
        jobs: jobs_tx.clone(),
        translator: opts.translator,
        sim_cfg: opts.sim,
        log: Arc::clone(&log),
        log_file,
        seq: AtomicU64::new(0),
        next_conn: AtomicU64::new(1),
    });
    let (stop_tx, stop_rx) = oneshot::channel::<()>();
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()?;
    let net_thread = std::thread::Builder::new().name("net".into()).spawn(move || {
        rt.block_on(async move {
            let tcp = TcpListener::from_std(tcp).expect("listener registers with the runtime");
            let s = Arc::clone(&shared);
            tokio::spawn(async move {
                while let Ok((stream, _)) = tcp.accept().await {
                    tokio::spawn(serve_tcp(Arc::clone(&s), stream));
                }
            });
            if let Some(ws) = ws {
                let ws = TcpListener::from_std(ws).expect("listener registers with the runtime");
                let s = Arc::clone(&shared);
                tokio::spawn(async move {
                    while let Ok((stream, _)) = ws.accept().await {
                        tokio::spawn(serve_ws(Arc::clone(&s), stream));
                    }
                });
            }
            let _ = stop_rx.await;
        });
        rt.shutdown_background();
    })?;
    Ok(ServerHandle {
        tcp_addr,
        ws_addr,
        log,
        stop: Some(stop_tx),
        jobs: jobs_tx,
        threads: vec![net_thread, sim_thread],
    })
}
