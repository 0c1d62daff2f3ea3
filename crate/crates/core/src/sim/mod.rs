//! Deterministic kinematic multirotor simulator.
//!
//! The vehicle follows an instantaneous-velocity model in a local NED frame
//! (x north, y east, z down) with a fixed step of [`DEFAULT_DT`] seconds.
//! Geodetic output is an equirectangular offset from a configured home point.

mod engine;
mod gps;
mod image;
mod kinematics;

pub use engine::{QueryResult, Simulator, StateReport, SubmitError, Submitted, TaskHandle, TaskRecord, TaskStatus, Timeout};
pub use gps::{gps_from_state, ned_from_geo, GeoPoint, GnssReport, GpsData, Vector3r, METERS_PER_DEGREE};
pub use image::{render_image, CameraImage, ImageError, ImageMetadata, IMAGE_HEIGHT, IMAGE_WIDTH};
pub use kinematics::{predict_program, Pose, StatementPrediction};

use crate::dsl::SafetyEnvelope;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

pub const DEFAULT_DT: f64 = 0.02;

/// Home latitude/longitude of the reference transcript's GPS payload.
pub const DEFAULT_HOME_LATITUDE: f64 = 47.64143399302358;
pub const DEFAULT_HOME_LONGITUDE: f64 = -122.1401333878863;
pub const DEFAULT_HOME_ALTITUDE: f64 = 122.0;

/// Default GPS epoch in nanoseconds since the Unix epoch.
pub const DEFAULT_EPOCH_NS: u64 = 1_732_460_418_770_807_296;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn max_abs_diff(self, other: Vec3) -> f64 {
        (self.x - other.x)
            .abs()
            .max((self.y - other.y).abs())
            .max((self.z - other.z).abs())
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HomeGeopoint {
    pub latitude: f64,
    pub longitude: f64,
    /// Meters above mean sea level.
    pub altitude: f64,
}

impl Default for HomeGeopoint {
    fn default() -> Self {
        Self {
            latitude: DEFAULT_HOME_LATITUDE,
            longitude: DEFAULT_HOME_LONGITUDE,
            altitude: DEFAULT_HOME_ALTITUDE,
        }
    }
}

impl HomeGeopoint {
    pub fn is_valid(&self) -> bool {
        self.latitude.abs() <= 90.0 && self.longitude.abs() <= 180.0 && self.altitude.is_finite()
    }
}

/// Rates and thresholds of the motion model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionModel {
    /// Takeoff climbs to this height above home (z = -takeoff_altitude).
    pub takeoff_altitude: f64,
    /// Climb and descent rate for takeoff and landing, m/s.
    pub vertical_speed: f64,
    /// Turn rate for yaw commands, deg/s.
    pub yaw_rate: f64,
    /// Distance at which position targets snap to the exact target.
    pub arrival_tolerance: f64,
    /// When set, a move issued while landed first performs a takeoff instead
    /// of failing with `NotAirborne`.
    pub auto_takeoff: bool,
}

impl Default for MotionModel {
    fn default() -> Self {
        Self {
            takeoff_altitude: 3.0,
            vertical_speed: 1.0,
            yaw_rate: 90.0,
            arrival_tolerance: 0.1,
            auto_takeoff: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub home: HomeGeopoint,
    pub envelope: SafetyEnvelope,
    pub dt: f64,
    pub epoch_ns: u64,
    pub motion: MotionModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            home: HomeGeopoint::default(),
            envelope: SafetyEnvelope::default(),
            dt: DEFAULT_DT,
            epoch_ns: DEFAULT_EPOCH_NS,
            motion: MotionModel::default(),
        }
    }
}

/// Snapshot of the simulator's ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub yaw: f64,
    pub landed: bool,
    pub sim_time: f64,
    pub active_task: Option<TaskRecord>,
}

impl SimState {
    /// Grounded at the origin facing north at t = 0.
    pub fn initial() -> Self {
        Self {
            position: Vec3::ZERO,
            velocity: Vec3::ZERO,
            yaw: 0.0,
            landed: true,
            sim_time: 0.0,
            active_task: None,
        }
    }

    pub fn pose(&self) -> Pose {
        Pose {
            position: self.position,
            yaw: self.yaw,
            landed: self.landed,
        }
    }
}
