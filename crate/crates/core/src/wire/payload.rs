//! JSON shapes of simulator results as they appear on the wire.

use crate::sim::{CameraImage, GpsData, QueryResult, SimState, StateReport, TaskRecord};
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub fn image_json(img: &CameraImage) -> Value {
    json!({
        "png_base64": base64::engine::general_purpose::STANDARD.encode(&img.png),
        "metadata": img.metadata,
    })
}

/// `{"gps": ...}`, `{"state": ...}` or `{"image": {png_base64, metadata}}`.
pub fn query_json(q: &QueryResult) -> Value {
    match q {
        QueryResult::Gps(g) => json!({ "gps": g }),
        QueryResult::State(s) => json!({ "state": s }),
        QueryResult::Image(img) => json!({ "image": image_json(img) }),
    }
}

/// A query payload decoded on the client side.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Gps(GpsData),
    State(StateReport),
    Image { png: Vec<u8>, metadata: crate::sim::ImageMetadata },
}

#[derive(Deserialize)]
struct WireImage {
    png_base64: String,
    metadata: crate::sim::ImageMetadata,
}

impl Payload {
    pub fn from_json(v: &Value) -> Result<Payload, String> {
        let obj = v.as_object().ok_or("payload is not an object")?;
        let (kind, body) = obj.iter().next().ok_or("empty payload")?;
        let err = |e: serde_json::Error| e.to_string();
        Ok(match kind.as_str() {
            "gps" => Payload::Gps(GpsData::deserialize(body).map_err(err)?),
            "state" => Payload::State(StateReport::deserialize(body).map_err(err)?),
            "image" => {
                let w = WireImage::deserialize(body).map_err(err)?;
                let png = base64::engine::general_purpose::STANDARD
                    .decode(w.png_base64)
                    .map_err(|e| e.to_string())?;
                Payload::Image { png, metadata: w.metadata }
            }
            other => return Err(format!("unknown payload kind `{other}`")),
        })
    }
}

/// One telemetry sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub sim_time: f64,
    pub position: crate::sim::Vec3,
    pub velocity: crate::sim::Vec3,
    pub yaw: f64,
    pub landed: bool,
    pub geo_point: crate::sim::GeoPoint,
    pub task: Option<TaskSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task_id: String,
    pub status: crate::sim::TaskStatus,
}

impl From<&TaskRecord> for TaskSummary {
    fn from(r: &TaskRecord) -> Self {
        Self {
            task_id: r.task_id.clone(),
            status: r.status,
        }
    }
}

pub fn telemetry(state: &SimState, gps: &GpsData) -> Telemetry {
    Telemetry {
        sim_time: state.sim_time,
        position: state.position,
        velocity: state.velocity,
        yaw: state.yaw,
        landed: state.landed,
        geo_point: gps.gnss.geo_point,
        task: state.active_task.as_ref().map(TaskSummary::from),
    }
}
