//! Closed-form endpoint prediction for statements, shared by validation and
//! task deadlines. It follows exactly the paths the stepping engine flies.

use super::{MotionModel, Vec3};
use crate::dsl::{angular_distance, Command, Program};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub yaw: f64,
    pub landed: bool,
}

impl Pose {
    pub fn grounded_origin() -> Self {
        Self {
            position: Vec3::ZERO,
            yaw: 0.0,
            landed: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatementPrediction {
    pub start: Pose,
    pub end: Pose,
    /// Corners of the straight-line path, in order, ending at `end.position`.
    pub waypoints: Vec<Vec3>,
    /// Nominal flight time in seconds.
    pub duration: f64,
    /// The statement moves the vehicle while it is on the ground and the
    /// model does not take off on its own.
    pub grounded_move: bool,
}

fn takeoff(pose: Pose, model: &MotionModel) -> (Pose, f64) {
    if !pose.landed {
        return (pose, 0.0);
    }
    let target = -model.takeoff_altitude;
    let end = Pose {
        position: Vec3::new(pose.position.x, pose.position.y, target),
        landed: false,
        ..pose
    };
    (end, (pose.position.z - target).abs() / model.vertical_speed)
}

fn predict_command(cmd: &Command, start: Pose, model: &MotionModel) -> StatementPrediction {
    let mut pose = start;
    let mut waypoints = Vec::new();
    let mut duration = 0.0;
    let mut grounded_move = false;

    if cmd.is_move() && pose.landed {
        if model.auto_takeoff {
            let (lifted, t) = takeoff(pose, model);
            pose = lifted;
            duration += t;
            waypoints.push(pose.position);
        } else {
            grounded_move = true;
        }
    }

    match *cmd {
        Command::Takeoff => {
            let (lifted, t) = takeoff(pose, model);
            pose = lifted;
            duration += t;
        }
        Command::Land => {
            if !pose.landed {
                duration += pose.position.z.abs() / model.vertical_speed;
                pose.position.z = 0.0;
                pose.landed = true;
            }
        }
        Command::MoveByVelocity { vx, vy, vz, duration: d } if !grounded_move => {
            pose.position = pose.position + Vec3::new(vx, vy, vz) * d;
            duration += d;
        }
        Command::MoveToPosition { x, y, z, speed } if !grounded_move => {
            let target = Vec3::new(x, y, z);
            duration += (target - pose.position).norm() / speed;
            pose.position = target;
        }
        Command::RotateToYaw { yaw } => {
            duration += angular_distance(yaw, pose.yaw) / model.yaw_rate;
            pose.yaw = yaw;
        }
        Command::Reset => pose = Pose::grounded_origin(),
        _ => {}
    }
    if waypoints.last() != Some(&pose.position) {
        waypoints.push(pose.position);
    }
    StatementPrediction {
        start,
        end: pose,
        waypoints,
        duration,
        grounded_move,
    }
}

/// Predicts every statement's path from `start`, chaining end poses.
pub fn predict_program(p: &Program, start: Pose, model: &MotionModel) -> Vec<StatementPrediction> {
    let mut pose = start;
    p.statements()
        .iter()
        .map(|cmd| {
            let pred = predict_command(cmd, pose, model);
            pose = pred.end;
            pred
        })
        .collect()
}
