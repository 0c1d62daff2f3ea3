//! Console rendering of programs and payloads in the style of the AirSim
//! Python client's object reprs.

use crate::dsl::{render_command, Command, Program};
use crate::sim::{GeoPoint, GpsData, StateReport, Vec3};

/// Python's `repr(float)`: shortest round-trip digits, scientific notation
/// below 1e-4 and from 1e16 up.
pub fn py_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let sci = format!("{x:e}");
    let (mantissa, exp) = sci.split_once('e').expect("LowerExp always has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    if !(-4..16).contains(&exp) {
        let e_sign = if exp < 0 { '-' } else { '+' };
        return format!("{sign}{mantissa}e{e_sign}{:02}", exp.abs());
    }
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    if exp < 0 {
        return format!("{sign}0.{}{digits}", "0".repeat((-exp - 1) as usize));
    }
    let int_len = exp as usize + 1;
    if digits.len() <= int_len {
        format!("{sign}{digits}{}.0", "0".repeat(int_len - digits.len()))
    } else {
        format!("{sign}{}.{}", &digits[..int_len], &digits[int_len..])
    }
}

fn py_bool(b: bool) -> &'static str {
    if b {
        "True"
    } else {
        "False"
    }
}

fn vector(v: Vec3) -> String {
    format!(
        "<Vector3r> {{ 'x_val': {},\n'y_val': {},\n'z_val': {}}}",
        py_float(v.x),
        py_float(v.y),
        py_float(v.z)
    )
}

fn geo_point(g: &GeoPoint) -> String {
    format!(
        "<GeoPoint> {{ 'altitude': {},\n'latitude': {},\n'longitude': {}}}",
        py_float(g.altitude),
        py_float(g.latitude),
        py_float(g.longitude)
    )
}

/// Multi-line `<GpsData> { ... }` block, one field per line.
pub fn format_gps(g: &GpsData) -> String {
    let n = &g.gnss;
    let velocity = Vec3::new(n.velocity.x_val, n.velocity.y_val, n.velocity.z_val);
    format!(
        "<GpsData> {{ 'gnss': <GnssReport> {{ 'eph': {},\n'epv': {},\n'fix_type': {},\n'geo_point': {},\n'time_utc': {},\n'velocity': {}}},\n'is_valid': {},\n'time_stamp': {}}}",
        py_float(n.eph),
        py_float(n.epv),
        n.fix_type,
        geo_point(&n.geo_point),
        n.time_utc,
        vector(velocity),
        py_bool(g.is_valid),
        g.time_stamp
    )
}

pub fn format_state(s: &StateReport) -> String {
    format!(
        "<MultirotorState> {{ 'landed': {},\n'position': {},\n'sim_time': {},\n'time_stamp': {},\n'velocity': {},\n'yaw': {}}}",
        py_bool(s.landed),
        vector(s.position),
        py_float(s.sim_time),
        s.time_stamp,
        vector(s.velocity),
        py_float(s.yaw)
    )
}

/// What the operator is shown for `program`: one statement per line, each
/// prefixed with `prefix`, and GPS/state queries wrapped in `print(...)`.
pub fn display_program(program: &Program, prefix: &str) -> String {
    program
        .statements()
        .iter()
        .map(|cmd| {
            let call = format!("{prefix}{}", render_command(cmd));
            match cmd {
                Command::GetGpsData | Command::GetState => format!("print({call})"),
                _ => call,
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}
