//! Safety envelope checks run before any program reaches the simulator.

use super::ast::{Command, Program};
use crate::sim::{predict_program, MotionModel, Pose, SimState, Vec3};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Axis-aligned NED box. `z` grows downward, so the ceiling is `z_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Geofence {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Default for Geofence {
    fn default() -> Self {
        Self {
            x_min: -100.0,
            x_max: 100.0,
            y_min: -100.0,
            y_max: 100.0,
            z_min: -50.0,
            z_max: 0.0,
        }
    }
}

impl Geofence {
    pub fn contains(&self, p: Vec3) -> bool {
        (self.x_min..=self.x_max).contains(&p.x)
            && (self.y_min..=self.y_max).contains(&p.y)
            && (self.z_min..=self.z_max).contains(&p.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetyEnvelope {
    pub max_speed: f64,
    pub geofence: Geofence,
    pub max_duration: f64,
}

impl Default for SafetyEnvelope {
    fn default() -> Self {
        Self {
            max_speed: 10.0,
            geofence: Geofence::default(),
            max_duration: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid safety envelope: {0}")]
pub struct InvalidEnvelope(pub String);

impl SafetyEnvelope {
    pub fn check(&self) -> Result<(), InvalidEnvelope> {
        let g = &self.geofence;
        let all = [self.max_speed, self.max_duration, g.x_min, g.x_max, g.y_min, g.y_max, g.z_min, g.z_max];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(InvalidEnvelope("all bounds must be finite".into()));
        }
        if self.max_speed <= 0.0 {
            return Err(InvalidEnvelope("max_speed must be positive".into()));
        }
        if self.max_duration <= 0.0 {
            return Err(InvalidEnvelope("max_duration must be positive".into()));
        }
        if g.x_min > g.x_max || g.y_min > g.y_max || g.z_min > g.z_max {
            return Err(InvalidEnvelope("geofence minimum exceeds maximum".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Speed,
    Duration,
    Geofence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub statement_index: usize,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "statement {}: {}", self.statement_index, self.detail)
    }
}

/// A program that passed [`validate`] against some envelope and start pose.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedProgram(Program);

impl ValidatedProgram {
    pub fn program(&self) -> &Program {
        &self.0
    }

    pub fn into_program(self) -> Program {
        self.0
    }
}

/// Checks speed, duration, and geofence for every statement, flying the
/// kinematic model from `start`. Reports every violation, not just the first.
pub fn validate(p: &Program, env: &SafetyEnvelope, start: &SimState) -> Result<ValidatedProgram, Vec<Violation>> {
    validate_with_model(p, env, start.pose(), &MotionModel::default())
}

pub fn validate_with_model(
    p: &Program,
    env: &SafetyEnvelope,
    start: Pose,
    model: &MotionModel,
) -> Result<ValidatedProgram, Vec<Violation>> {
    let mut violations = Vec::new();
    let predictions = predict_program(p, start, model);
    for (i, (cmd, pred)) in p.statements().iter().zip(&predictions).enumerate() {
        let mut flag = |rule, detail: String| {
            violations.push(Violation {
                statement_index: i,
                rule,
                detail,
            })
        };
        let speed = match *cmd {
            Command::MoveByVelocity { vx, vy, vz, .. } => Some(Vec3::new(vx, vy, vz).norm()),
            Command::MoveToPosition { speed, .. } => Some(speed),
            _ => None,
        };
        if let Some(speed) = speed {
            if speed > env.max_speed {
                flag(
                    Rule::Speed,
                    format!("speed {speed} m/s exceeds the {} m/s limit", env.max_speed),
                );
            }
        }
        if cmd.is_move() && pred.duration > env.max_duration {
            flag(
                Rule::Duration,
                format!(
                    "flight time {} s exceeds the {} s limit",
                    pred.duration, env.max_duration
                ),
            );
        }
        let mut moved = pred.waypoints.iter().filter(|w| **w != pred.start.position);
        if let Some(out) = moved.find(|w| !env.geofence.contains(**w)) {
            flag(
                Rule::Geofence,
                format!(
                    "path reaches ({}, {}, {}) outside the geofence",
                    out.x, out.y, out.z
                ),
            );
        }
    }
    if violations.is_empty() {
        Ok(ValidatedProgram(p.clone()))
    } else {
        Err(violations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_program;

    fn hovering() -> SimState {
        SimState {
            position: Vec3::new(0.0, 0.0, -3.0),
            landed: false,
            ..SimState::initial()
        }
    }

    fn env(max_speed: f64) -> SafetyEnvelope {
        SafetyEnvelope {
            max_speed,
            ..SafetyEnvelope::default()
        }
    }

    #[test]
    fn overspeed_flagged() {
        let p = parse_program("moveByVelocityAsync(50, 0, 0, duration=1)").unwrap();
        let v = validate(&p, &env(10.0), &hovering()).unwrap_err();
        assert_eq!(v[0].statement_index, 0);
        assert_eq!(v[0].rule, Rule::Speed);
    }

    #[test]
    fn hover_always_valid() {
        let tight = SafetyEnvelope {
            max_speed: 0.001,
            max_duration: 0.001,
            ..SafetyEnvelope::default()
        };
        let p = parse_program("hoverAsync()").unwrap();
        assert!(validate(&p, &tight, &hovering()).is_ok());
        assert!(validate(&p, &tight, &SimState::initial()).is_ok());
    }

    #[test]
    fn short_move_inside_fence() {
        let p = parse_program("moveByVelocityAsync(2, 0, 0, duration=2)").unwrap();
        let ok = validate(&p, &SafetyEnvelope::default(), &hovering()).unwrap();
        assert_eq!(ok.program(), &p);
    }

    #[test]
    fn reports_all_violations() {
        let p = parse_program(
            "moveByVelocityAsync(60, 0, 0, duration=40)\nhoverAsync()\nmoveToPositionAsync(0, 500, -3, 1)",
        )
        .unwrap();
        let v = validate(&p, &SafetyEnvelope::default(), &hovering()).unwrap_err();
        let rules: Vec<_> = v.iter().map(|x| (x.statement_index, x.rule)).collect();
        assert_eq!(
            rules,
            vec![
                (0, Rule::Speed),
                (0, Rule::Duration),
                (0, Rule::Geofence),
                (2, Rule::Duration),
                (2, Rule::Geofence)
            ]
        );
    }

    #[test]
    fn does_not_mutate_inputs() {
        let p = parse_program("moveByVelocityAsync(2, 0, 0, duration=2)").unwrap();
        let (p0, e0, s0) = (p.clone(), SafetyEnvelope::default(), hovering());
        let _ = validate(&p, &e0, &s0);
        assert_eq!((p, SafetyEnvelope::default(), hovering()), (p0, e0, s0));
    }

    #[test]
    fn envelope_sanity() {
        assert!(SafetyEnvelope::default().check().is_ok());
        assert!(env(0.0).check().is_err());
        assert!(env(f64::INFINITY).check().is_err());
    }
}
