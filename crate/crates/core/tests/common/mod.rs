#![allow(dead_code)]

use aerocmd::corpus::{shipped_corpus, shipped_templates, expand_templates, XorShift64Star};
use aerocmd::dsl::{parse_program, Command, ImageType, Program};
use aerocmd::nl::{Translator, TranslatorConfig};
use aerocmd::repl::{run_session, SessionConfig};
use aerocmd::sim::SimConfig;
use aerocmd::wire::{spawn, ServerHandle, ServerOptions, SimSpeed};
use std::path::Path;

pub const HOME_LAT: f64 = 47.64143399302358;
pub const HOME_LON: f64 = -122.1401333878863;

/// The three console exchanges, each confirmed.
pub const FIG2_SCRIPT: &str = "Return to live camera image\ny\nGet the drone's GPS data\ny\nMove the drone forward 2 meters\ny\n";

pub fn shipped_translator() -> Translator {
    Translator::new(shipped_corpus(), TranslatorConfig::default())
}

/// Server on ephemeral ports, unlimited speed, moves take off on their own.
pub fn start_server() -> ServerHandle {
    start_server_with(|_| {})
}

pub fn start_server_with(tweak: impl FnOnce(&mut ServerOptions)) -> ServerHandle {
    let mut sim = SimConfig::default();
    sim.motion.auto_takeoff = true;
    let mut opts = ServerOptions {
        tcp_addr: "127.0.0.1:0".into(),
        ws_addr: Some("127.0.0.1:0".into()),
        sim,
        speed: SimSpeed::Unlimited,
        translator: Some(shipped_translator()),
        request_log_path: None,
    };
    tweak(&mut opts);
    spawn(opts).expect("server binds")
}

/// Runs a console session against `endpoint` with `script` as stdin and
/// returns (terminal output, exit code).
pub fn run_scripted(endpoint: &str, script: &str, image_dir: &Path) -> (String, i32) {
    let cfg = SessionConfig {
        endpoint: endpoint.to_string(),
        image_output_dir: image_dir.to_path_buf(),
        echo_input: true,
        ..SessionConfig::default()
    };
    let translator = shipped_translator();
    let mut input = script.as_bytes();
    let mut out = Vec::new();
    let code = run_session(&cfg, &translator, &mut input, &mut out, None);
    (String::from_utf8(out).expect("console output is utf-8"), code)
}

/// A fresh server, one scripted session, server shut down.
pub fn fresh_session(script: &str, image_dir: &Path) -> (String, i32) {
    let server = start_server();
    let endpoint = server.tcp_addr().to_string();
    let result = run_scripted(&endpoint, script, image_dir);
    server.shutdown();
    result
}

/// Distinct gold programs from the template expander, in first-seen order.
/// Slot steps are refined eightfold so fractional values show up and the
/// shipped families yield enough distinct programs.
pub fn expander_programs(n: usize) -> Vec<Program> {
    let mut families = shipped_templates();
    for f in &mut families {
        for r in f.slot_ranges.values_mut() {
            r.step /= 8.0;
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for seed in 0u64.. {
        for ex in expand_templates(&families, seed, 200).expect("shipped templates expand") {
            if seen.insert(ex.gold_program.clone()) {
                out.push(parse_program(&ex.gold_program).expect("expander emits valid programs"));
                if out.len() == n {
                    return out;
                }
            }
        }
        assert!(seed < 64, "expander yields fewer than {n} distinct programs");
    }
    unreachable!()
}

fn uniform(rng: &mut XorShift64Star, lo: f64, hi: f64) -> f64 {
    let unit = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    lo + (hi - lo) * unit
}

/// Rounded to two decimals so programs stay readable in failure output.
fn coarse(rng: &mut XorShift64Star, lo: f64, hi: f64) -> f64 {
    (uniform(rng, lo, hi) * 100.0).round() / 100.0
}

/// Takeoff followed by up to five random statements. Bounds deliberately
/// straddle the default envelope, so some of these are rejected.
pub fn random_program(rng: &mut XorShift64Star) -> Program {
    let mut stmts = vec![Command::Takeoff];
    let n = 1 + rng.below(5) as usize;
    for _ in 0..n {
        let c = match rng.below(8) {
            0 | 1 => Command::MoveByVelocity {
                vx: coarse(rng, -12.0, 12.0),
                vy: coarse(rng, -12.0, 12.0),
                vz: coarse(rng, -3.0, 3.0),
                duration: coarse(rng, 0.1, 12.0),
            },
            2 | 3 => Command::MoveToPosition {
                x: coarse(rng, -130.0, 130.0),
                y: coarse(rng, -130.0, 130.0),
                z: coarse(rng, -60.0, 2.0),
                speed: coarse(rng, 0.5, 12.0),
            },
            4 => Command::RotateToYaw {
                yaw: coarse(rng, -360.0, 360.0),
            },
            5 => Command::Hover,
            6 => Command::GetGpsData,
            _ => Command::GetImage {
                camera: 0,
                image_type: ImageType::Scene,
            },
        };
        stmts.push(c);
    }
    Program::new(stmts).expect("non-empty")
}

/// Each of these breaks the default envelope in one way.
pub const VIOLATING_PROGRAMS: [&str; 20] = [
    "takeoffAsync()\nmoveToPositionAsync(150, 0, -3, 2)",
    "takeoffAsync()\nmoveToPositionAsync(-101, 0, -3, 2)",
    "takeoffAsync()\nmoveToPositionAsync(0, 100.5, -3, 2)",
    "takeoffAsync()\nmoveToPositionAsync(0, -250, -3, 5)",
    "takeoffAsync()\nmoveToPositionAsync(0, 0, -60, 2)",
    "takeoffAsync()\nmoveToPositionAsync(0, 0, 1, 2)",
    "takeoffAsync()\nmoveToPositionAsync(5, 5, -5, 11)",
    "takeoffAsync()\nmoveToPositionAsync(5, 0, -3, 0.1)",
    "takeoffAsync()\nmoveByVelocityAsync(10, 0, 0, duration=11)",
    "takeoffAsync()\nmoveByVelocityAsync(0, -9, 0, duration=12)",
    "takeoffAsync()\nmoveByVelocityAsync(0, 0, -5, duration=10)",
    "takeoffAsync()\nmoveByVelocityAsync(0, 0, 2, duration=3)",
    "takeoffAsync()\nmoveByVelocityAsync(8, 8, 0, duration=1)",
    "takeoffAsync()\nmoveByVelocityAsync(15, 0, 0, duration=1)",
    "takeoffAsync()\nmoveByVelocityAsync(1, 0, 0, duration=31)",
    "takeoffAsync()\nhoverAsync()\nmoveByVelocityAsync(5, 0, 0, duration=19)\nmoveByVelocityAsync(5, 0, 0, duration=2)",
    "takeoffAsync()\nmoveToPositionAsync(90, 0, -3, 5)\nmoveByVelocityAsync(4, 0, 0, duration=3)",
    "takeoffAsync()\nmoveToPositionAsync(0, 0, -45, 5)\nmoveByVelocityAsync(0, 0, -2, duration=3)",
    "takeoffAsync()\nmoveToPositionAsync(-95, -95, -3, 5)\nmoveToPositionAsync(-95, -105, -3, 5)",
    "takeoffAsync()\nmoveByVelocityAsync(3, 4, 0, duration=2)\nmoveToPositionAsync(6, 200, -3, 5)",
];

/// Opens `conns` connections and on each writes `per_conn` requests back to
/// back before reading anything. Ids are prefixed with the connection index
/// so a reply on the wrong socket is caught, and `translate` requests carry a
/// per-request number that must come back in the rendered program.
pub fn soak(addr: std::net::SocketAddr, conns: usize, per_conn: usize) -> Result<(), String> {
    use aerocmd::wire::{encode_frame, FrameDecoder};
    use serde_json::json;
    use std::io::{Read, Write};

    let workers: Vec<_> = (0..conns)
        .map(|c| {
            std::thread::spawn(move || -> Result<(), String> {
                let stream = std::net::TcpStream::connect(addr).map_err(|e| e.to_string())?;
                stream
                    .set_read_timeout(Some(std::time::Duration::from_secs(60)))
                    .map_err(|e| e.to_string())?;
                let mut writer = stream.try_clone().map_err(|e| e.to_string())?;
                let send = std::thread::spawn(move || {
                    let mut buf = Vec::new();
                    for i in 0..per_conn {
                        let id = format!("c{c}-{i}");
                        let req = match i % 4 {
                            0 => json!({"id": id, "method": "ping"}),
                            1 => json!({"id": id, "method": "translate",
                                        "params": {"utterance": format!("Move the drone forward {} meters", tag(c, i))}}),
                            2 => json!({"id": id, "method": "gps.get"}),
                            _ => json!({"id": id, "method": "command.submit", "params": {"program": "getMultirotorState()"}}),
                        };
                        buf.extend(encode_frame(&req).expect("small frame"));
                    }
                    writer.write_all(&buf)
                });
                let mut reader = stream;
                let mut decoder = FrameDecoder::new();
                let mut seen = vec![false; per_conn];
                let mut got = 0;
                let mut chunk = [0u8; 4096];
                while got < per_conn {
                    let n = reader.read(&mut chunk).map_err(|e| format!("conn {c}: {e}"))?;
                    if n == 0 {
                        return Err(format!("conn {c}: closed after {got} replies"));
                    }
                    for v in decoder.push(&chunk[..n]).map_err(|e| e.to_string())? {
                        check_reply(c, &v, &mut seen)?;
                        got += 1;
                    }
                }
                send.join().expect("writer thread").map_err(|e| e.to_string())?;
                Ok(())
            })
        })
        .collect();
    let mut errors = Vec::new();
    for w in workers {
        if let Err(e) = w.join().expect("soak worker") {
            errors.push(e);
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors.join("; "))
    }
}

fn tag(c: usize, i: usize) -> usize {
    c * 10_000 + i + 1
}

fn check_reply(c: usize, v: &serde_json::Value, seen: &mut [bool]) -> Result<(), String> {
    let id = v["id"].as_str().ok_or_else(|| format!("conn {c}: reply without id: {v}"))?;
    let rest = id
        .strip_prefix(&format!("c{c}-"))
        .ok_or_else(|| format!("conn {c}: foreign id {id}"))?;
    let i: usize = rest.parse().map_err(|_| format!("conn {c}: bad id {id}"))?;
    if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
        return Err(format!("conn {c}: duplicate or unknown id {id}"));
    }
    let r = &v["result"];
    let ok = match i % 4 {
        0 => r["server_version"].as_u64() == Some(1),
        1 => {
            let n = tag(c, i);
            r["candidates"][0]["rendered"].as_str() == Some(&format!("moveByVelocityAsync({n}, 0, 0, duration={n})"))
        }
        2 => r["gnss"]["geo_point"]["latitude"].is_number(),
        _ => r["result"]["state"]["position"].is_object(),
    };
    if ok {
        Ok(())
    } else {
        Err(format!("conn {c}: reply {id} has the wrong content: {v}"))
    }
}

/// Mutated predictions for `gold`, covering the exact / AST-only /
/// execution-only / none cases.
pub fn mutations(gold: &Program) -> Vec<String> {
    use aerocmd::dsl::render_program;
    use aerocmd::repl::display_program;

    let stmts = gold.statements().to_vec();
    let with = |f: &dyn Fn(&mut Vec<Command>)| {
        let mut s = stmts.clone();
        f(&mut s);
        Program::new(s).map(|p| render_program(&p)).unwrap_or_default()
    };
    vec![
        render_program(gold),
        display_program(gold, "AirSim_client."),
        render_program(gold).replace(", ", " ,  "),
        with(&|s| nudge(&mut s[0], 1e-12)),
        with(&|s| nudge(&mut s[0], 0.5)),
        with(&|s| s.push(Command::Hover)),
        with(&|s| s.push(Command::GetGpsData)),
        with(&|s| {
            s.pop();
            if s.is_empty() {
                s.push(Command::Land);
            }
        }),
        with(&|s| s.reverse()),
        "fly to the moon".to_string(),
    ]
}

fn nudge(c: &mut Command, d: f64) {
    match c {
        Command::MoveByVelocity { vx, .. } => *vx += d,
        Command::MoveToPosition { x, .. } => *x += d,
        Command::RotateToYaw { yaw } => *yaw += d * 100.0,
        Command::GetImage { camera, .. } if d >= 0.5 => *camera += 1,
        other => *other = Command::RotateToYaw { yaw: 90.0 + d },
    }
}
