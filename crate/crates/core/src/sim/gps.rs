//! Geodetic projection of the local NED state.

use super::{HomeGeopoint, Vec3};
use serde::{Deserialize, Serialize};

/// Meters per degree of latitude (and of longitude at the equator) in the
/// equirectangular approximation.
pub const METERS_PER_DEGREE: f64 = 111_320.0;

const EPH: f64 = 0.1;
const EPV: f64 = 0.1;
const FIX_3D: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub altitude: f64,
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vector3r {
    pub x_val: f64,
    pub y_val: f64,
    pub z_val: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnssReport {
    pub eph: f64,
    pub epv: f64,
    pub fix_type: u8,
    pub geo_point: GeoPoint,
    /// Microseconds since the Unix epoch.
    pub time_utc: u64,
    pub velocity: Vector3r,
}

/// GPS payload with the same field names and nesting as the simulator
/// client's `GpsData` object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsData {
    pub gnss: GnssReport,
    pub is_valid: bool,
    /// Nanoseconds since the Unix epoch.
    pub time_stamp: u64,
}

/// Projects a NED position onto the home geopoint:
/// `lat = home.lat + x / 111320`, `lon = home.lon + y / (111320 cos(home.lat))`,
/// `alt = home.alt - z`.
pub fn gps_from_state(
    position: Vec3,
    velocity: Vec3,
    sim_time: f64,
    home: &HomeGeopoint,
    epoch_ns: u64,
) -> GpsData {
    let lon_scale = METERS_PER_DEGREE * home.latitude.to_radians().cos();
    let time_stamp = epoch_ns + (sim_time * 1e9).round() as u64;
    GpsData {
        gnss: GnssReport {
            eph: EPH,
            epv: EPV,
            fix_type: FIX_3D,
            geo_point: GeoPoint {
                altitude: home.altitude - position.z,
                latitude: home.latitude + position.x / METERS_PER_DEGREE,
                longitude: home.longitude + position.y / lon_scale,
            },
            time_utc: time_stamp / 1000,
            velocity: Vector3r {
                x_val: velocity.x,
                y_val: velocity.y,
                z_val: velocity.z,
            },
        },
        is_valid: true,
        time_stamp,
    }
}

/// Inverse of [`gps_from_state`]'s position mapping.
pub fn ned_from_geo(geo: &GeoPoint, home: &HomeGeopoint) -> Vec3 {
    let lon_scale = METERS_PER_DEGREE * home.latitude.to_radians().cos();
    Vec3::new(
        (geo.latitude - home.latitude) * METERS_PER_DEGREE,
        (geo.longitude - home.longitude) * lon_scale,
        home.altitude - geo.altitude,
    )
}
