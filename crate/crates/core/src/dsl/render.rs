//! Canonical text form of a [`Program`].

use super::ast::{Command, ImageType, Program};
use std::fmt::Write;

/// Shortest decimal that round-trips; integers carry no `.0` and `-0` prints as `0`.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

fn image_type_literal(t: ImageType) -> &'static str {
    match t {
        ImageType::Scene => "ImageType.Scene",
        ImageType::Depth => "ImageType.Depth",
    }
}

pub fn render_command(c: &Command) -> String {
    let n = format_number;
    let args = match c {
        Command::MoveByVelocity { vx, vy, vz, duration } => {
            format!("{}, {}, {}, duration={}", n(*vx), n(*vy), n(*vz), n(*duration))
        }
        Command::MoveToPosition { x, y, z, speed } => {
            format!("{}, {}, {}, {}", n(*x), n(*y), n(*z), n(*speed))
        }
        Command::RotateToYaw { yaw } => n(*yaw),
        Command::GetImage { camera, image_type } => {
            format!("{camera}, {}", image_type_literal(*image_type))
        }
        _ => String::new(),
    };
    format!("{}({args})", c.api_name())
}

/// Renders one statement per line with no receiver prefix and no trailing newline.
pub fn render_program(p: &Program) -> String {
    let mut out = String::new();
    for (i, c) in p.statements().iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = write!(out, "{}", render_command(c));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_program;

    #[test]
    fn transcript_argument_style() {
        let p = Program::single(Command::MoveByVelocity { vx: 2.0, vy: 0.0, vz: 0.0, duration: 2.0 });
        assert_eq!(render_program(&p), "moveByVelocityAsync(2, 0, 0, duration=2)");
    }

    #[test]
    fn nullary() {
        assert_eq!(render_program(&Program::single(Command::GetGpsData)), "getGpsData()");
    }

    #[test]
    fn numbers() {
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(2.5), "2.5");
        assert_eq!(format_number(-3.0), "-3");
        assert_eq!(format_number(0.1 + 0.2), "0.30000000000000004");
        assert_eq!(format_number(1e-7), "0.0000001");
    }

    #[test]
    fn multi_statement_round_trip() {
        let text = "takeoffAsync()\nmoveToPositionAsync(4, 0, -10, 2)\nrotateToYawAsync(-90)\nsimGetImage(0, ImageType.Depth)\nlandAsync()";
        let p = parse_program(text).unwrap();
        assert_eq!(render_program(&p), text);
    }
}
