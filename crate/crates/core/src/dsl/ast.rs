//! Typed statements of the AeroCmd language.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Absolute tolerance used by [`ast_equiv`] for numeric arguments.
pub const AST_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageType {
    Scene,
    Depth,
}

impl ImageType {
    pub fn as_str(self) -> &'static str {
        match self {
            ImageType::Scene => "scene",
            ImageType::Depth => "depth",
        }
    }
}

impl fmt::Display for ImageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown image type `{0}`")]
pub struct UnknownImageType(pub String);

impl FromStr for ImageType {
    type Err = UnknownImageType;

    /// Accepts `scene`/`depth` in any case, optionally qualified as
    /// `ImageType.Scene` or `airsim.ImageType.Scene`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let last = s.rsplit('.').next().unwrap_or(s);
        let qualifier = &s[..s.len() - last.len()];
        let qualifier_ok = matches!(
            qualifier.to_ascii_lowercase().as_str(),
            "" | "imagetype." | "airsim.imagetype."
        );
        match (qualifier_ok, last.to_ascii_lowercase().as_str()) {
            (true, "scene") => Ok(ImageType::Scene),
            (true, "depth") | (true, "depthplanar") | (true, "depthperspective") => {
                Ok(ImageType::Depth)
            }
            _ => Err(UnknownImageType(s.to_string())),
        }
    }
}

/// One AeroCmd statement.
///
/// Positions and velocities are NED (x north, y east, z down), so climbing
/// means a negative `vz`. Yaw is in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Command {
    Takeoff,
    Land,
    Hover,
    MoveByVelocity { vx: f64, vy: f64, vz: f64, duration: f64 },
    MoveToPosition { x: f64, y: f64, z: f64, speed: f64 },
    RotateToYaw { yaw: f64 },
    GetGpsData,
    GetState,
    GetImage { camera: u32, image_type: ImageType },
    Reset,
}

impl Command {
    /// The simulator client method this statement is spelled as.
    pub fn api_name(&self) -> &'static str {
        match self {
            Command::Takeoff => "takeoffAsync",
            Command::Land => "landAsync",
            Command::Hover => "hoverAsync",
            Command::MoveByVelocity { .. } => "moveByVelocityAsync",
            Command::MoveToPosition { .. } => "moveToPositionAsync",
            Command::RotateToYaw { .. } => "rotateToYawAsync",
            Command::GetGpsData => "getGpsData",
            Command::GetState => "getMultirotorState",
            Command::GetImage { .. } => "simGetImage",
            Command::Reset => "reset",
        }
    }

    /// Queries return a payload synchronously and never disturb motion.
    pub fn is_query(&self) -> bool {
        matches!(
            self,
            Command::GetGpsData | Command::GetState | Command::GetImage { .. }
        )
    }

    /// Durative statements take simulated time and run under a task handle.
    pub fn is_durative(&self) -> bool {
        !self.is_query() && !matches!(self, Command::Reset)
    }

    /// Statements that translate the vehicle and therefore need it airborne.
    pub fn is_move(&self) -> bool {
        matches!(
            self,
            Command::MoveByVelocity { .. } | Command::MoveToPosition { .. }
        )
    }
}

/// An ordered, non-empty list of statements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Command>", into = "Vec<Command>")]
pub struct Program {
    statements: Vec<Command>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("a program needs at least one statement")]
pub struct EmptyProgram;

impl Program {
    pub fn new(statements: Vec<Command>) -> Result<Self, EmptyProgram> {
        if statements.is_empty() {
            return Err(EmptyProgram);
        }
        Ok(Self { statements })
    }

    pub fn single(command: Command) -> Self {
        Self {
            statements: vec![command],
        }
    }

    pub fn statements(&self) -> &[Command] {
        &self.statements
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    /// Single-statement programs form the simple command set; longer ones are skills.
    pub fn is_skill(&self) -> bool {
        self.statements.len() > 1
    }

    pub fn into_statements(self) -> Vec<Command> {
        self.statements
    }
}

impl TryFrom<Vec<Command>> for Program {
    type Error = EmptyProgram;

    fn try_from(statements: Vec<Command>) -> Result<Self, Self::Error> {
        Program::new(statements)
    }
}

impl From<Program> for Vec<Command> {
    fn from(p: Program) -> Self {
        p.statements
    }
}

impl From<Command> for Program {
    fn from(c: Command) -> Self {
        Program::single(c)
    }
}

/// Wraps an angle in degrees into `[-180, 180)`.
pub fn wrap_degrees(angle: f64) -> f64 {
    let wrapped = (angle + 180.0).rem_euclid(360.0) - 180.0;
    if wrapped == 0.0 {
        0.0
    } else {
        wrapped
    }
}

/// Smallest absolute angular difference between two headings, in degrees.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    wrap_degrees(a - b).abs()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn commands_equiv(a: &Command, b: &Command, tol: f64) -> bool {
    use Command::*;
    match (a, b) {
        (
            MoveByVelocity { vx, vy, vz, duration },
            MoveByVelocity {
                vx: vx2,
                vy: vy2,
                vz: vz2,
                duration: d2,
            },
        ) => close(*vx, *vx2, tol) && close(*vy, *vy2, tol) && close(*vz, *vz2, tol) && close(*duration, *d2, tol),
        (
            MoveToPosition { x, y, z, speed },
            MoveToPosition {
                x: x2,
                y: y2,
                z: z2,
                speed: s2,
            },
        ) => close(*x, *x2, tol) && close(*y, *y2, tol) && close(*z, *z2, tol) && close(*speed, *s2, tol),
        (RotateToYaw { yaw }, RotateToYaw { yaw: yaw2 }) => angular_distance(*yaw, *yaw2) <= tol,
        (a, b) => a == b,
    }
}

/// Structural equality of two programs after normalization: keyword and
/// positional forms are already identical ASTs, yaw is compared modulo 360°,
/// and numbers are compared at [`AST_TOLERANCE`].
///
/// At a positive tolerance this is not transitive, so it is only meant for
/// pairwise comparison; [`ast_equiv_with_tolerance`] at `0.0` is a true
/// equivalence relation.
pub fn ast_equiv(a: &Program, b: &Program) -> bool {
    ast_equiv_with_tolerance(a, b, AST_TOLERANCE)
}

pub fn ast_equiv_with_tolerance(a: &Program, b: &Program, tol: f64) -> bool {
    a.len() == b.len()
        && a
            .statements()
            .iter()
            .zip(b.statements())
            .all(|(x, y)| commands_equiv(x, y, tol))
}
