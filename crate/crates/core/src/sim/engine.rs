//! The stepping simulator: single owner, fixed step, durative tasks with
//! preemption.

use super::gps::{gps_from_state, GpsData};
use super::image::{render_image, CameraImage, ImageError};
use super::kinematics::{predict_program, Pose};
use super::{SimConfig, SimState, Vec3};
use crate::dsl::{angular_distance, validate_with_model, Command, ImageType, Program, Violation};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use std::fmt;

const DEADLINE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Running,
    Completed,
    Preempted,
    Rejected,
}

impl TaskStatus {
    pub fn is_terminal(self) -> bool {
        self != TaskStatus::Running
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskStatus::Running => "running",
            TaskStatus::Completed => "completed",
            TaskStatus::Preempted => "preempted",
            TaskStatus::Rejected => "rejected",
        }
    }
}

impl fmt::Display for TaskStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskHandle {
    pub task_id: String,
    pub status: TaskStatus,
}

/// Kinematic part of `getMultirotorState`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateReport {
    pub position: Vec3,
    pub velocity: Vec3,
    pub yaw: f64,
    pub landed: bool,
    pub sim_time: f64,
    pub time_stamp: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryResult {
    Gps(GpsData),
    State(StateReport),
    Image(CameraImage),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskRecord {
    pub task_id: String,
    pub command: Program,
    pub started_at: f64,
    /// Nominal completion time from the kinematic prediction.
    pub deadline: f64,
    pub status: TaskStatus,
    #[serde(skip)]
    pub results: Vec<QueryResult>,
}

impl<'de> Deserialize<'de> for TaskRecord {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            task_id: String,
            command: Program,
            started_at: f64,
            deadline: f64,
            status: TaskStatus,
        }
        let raw = Raw::deserialize(d)?;
        Ok(TaskRecord {
            task_id: raw.task_id,
            command: raw.command,
            started_at: raw.started_at,
            deadline: raw.deadline,
            status: raw.status,
            results: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Submitted {
    Task(TaskHandle),
    Query(QueryResult),
    Reset(SimState),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SubmitError {
    #[error("validation rejected: {}", format_violations(.0))]
    ValidationRejected(Vec<Violation>),
    #[error("statement {statement_index} (`{method}`) needs the vehicle airborne; take off first")]
    NotAirborne { statement_index: usize, method: &'static str },
    #[error(transparent)]
    Image(#[from] ImageError),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("program still running after {limit} simulated seconds")]
pub struct Timeout {
    pub limit: f64,
}

#[derive(Debug, Clone)]
enum Motion {
    Velocity {
        origin: Vec3,
        velocity: Vec3,
        start_tick: u64,
        duration: f64,
    },
    Line {
        origin: Vec3,
        target: Vec3,
        speed: f64,
        start_tick: u64,
        /// Remaining distance at which the vehicle snaps onto the target.
        snap: f64,
        lands: bool,
    },
    Yaw {
        target: f64,
    },
}

#[derive(Debug)]
struct ActiveTask {
    id: String,
    queue: VecDeque<Command>,
    motion: Option<Motion>,
}

/// A single-vehicle kinematic simulator.
#[derive(Debug)]
pub struct Simulator {
    cfg: SimConfig,
    position: Vec3,
    velocity: Vec3,
    yaw: f64,
    landed: bool,
    tick: u64,
    active: Option<ActiveTask>,
    tasks: HashMap<String, TaskRecord>,
    next_task: u64,
}

impl Simulator {
    pub fn new(cfg: SimConfig) -> Self {
        Self {
            cfg,
            position: Vec3::ZERO,
            velocity: Vec3::ZERO,
            yaw: 0.0,
            landed: true,
            tick: 0,
            active: None,
            tasks: HashMap::new(),
            next_task: 1,
        }
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn sim_time(&self) -> f64 {
        self.tick as f64 * self.cfg.dt
    }

    pub fn pose(&self) -> Pose {
        Pose {
            position: self.position,
            yaw: self.yaw,
            landed: self.landed,
        }
    }

    pub fn state(&self) -> SimState {
        SimState {
            position: self.position,
            velocity: self.velocity,
            yaw: self.yaw,
            landed: self.landed,
            sim_time: self.sim_time(),
            active_task: self
                .active
                .as_ref()
                .and_then(|a| self.tasks.get(&a.id))
                .cloned(),
        }
    }

    pub fn is_busy(&self) -> bool {
        self.active.is_some()
    }

    pub fn task(&self, task_id: &str) -> Option<&TaskRecord> {
        self.tasks.get(task_id)
    }

    /// Back to the grounded origin. The clock keeps running and any running
    /// task is marked preempted.
    pub fn reset(&mut self) -> SimState {
        self.preempt_active();
        self.reset_kinematics();
        self.state()
    }

    fn reset_kinematics(&mut self) {
        self.position = Vec3::ZERO;
        self.velocity = Vec3::ZERO;
        self.yaw = 0.0;
        self.landed = true;
    }

    pub fn gps(&self) -> GpsData {
        gps_from_state(
            self.position,
            self.velocity,
            self.sim_time(),
            &self.cfg.home,
            self.cfg.epoch_ns,
        )
    }

    pub fn state_report(&self) -> StateReport {
        StateReport {
            position: self.position,
            velocity: self.velocity,
            yaw: self.yaw,
            landed: self.landed,
            sim_time: self.sim_time(),
            time_stamp: self.gps().time_stamp,
        }
    }

    pub fn image(&self, camera: u32, image_type: ImageType) -> Result<CameraImage, ImageError> {
        render_image(&self.state(), camera, image_type)
    }

    /// Answers a query statement without touching motion.
    pub fn query(&self, cmd: &Command) -> Result<Option<QueryResult>, ImageError> {
        Ok(match *cmd {
            Command::GetGpsData => Some(QueryResult::Gps(self.gps())),
            Command::GetState => Some(QueryResult::State(self.state_report())),
            Command::GetImage { camera, image_type } => {
                Some(QueryResult::Image(self.image(camera, image_type)?))
            }
            _ => None,
        })
    }

    pub fn submit(&mut self, cmd: Command) -> Result<Submitted, SubmitError> {
        self.submit_program(&Program::single(cmd))
    }

    /// Validates `program` from the current pose and runs it.
    ///
    /// A lone query answers synchronously and a lone `reset` applies
    /// immediately; anything else becomes a task that preempts the running one.
    pub fn submit_program(&mut self, program: &Program) -> Result<Submitted, SubmitError> {
        let start = self.pose();
        validate_with_model(program, &self.cfg.envelope, start, &self.cfg.motion)
            .map_err(SubmitError::ValidationRejected)?;
        let predictions = predict_program(program, start, &self.cfg.motion);
        if let Some((i, _)) = predictions.iter().enumerate().find(|(_, p)| p.grounded_move) {
            return Err(SubmitError::NotAirborne {
                statement_index: i,
                method: program.statements()[i].api_name(),
            });
        }
        if let [only] = program.statements() {
            if only.is_query() {
                let result = self.query(only)?.expect("query statement");
                return Ok(Submitted::Query(result));
            }
            if *only == Command::Reset {
                return Ok(Submitted::Reset(self.reset()));
            }
        }
        for cmd in program.statements() {
            if let Command::GetImage { camera, .. } = cmd {
                if *camera != 0 {
                    return Err(ImageError::UnknownCamera(*camera).into());
                }
            }
        }

        self.preempt_active();
        let id = format!("task-{}", self.next_task);
        self.next_task += 1;
        let now = self.sim_time();
        let nominal: f64 = predictions.iter().map(|p| p.duration).sum();
        self.tasks.insert(
            id.clone(),
            TaskRecord {
                task_id: id.clone(),
                command: program.clone(),
                started_at: now,
                deadline: now + nominal,
                status: TaskStatus::Running,
                results: Vec::new(),
            },
        );
        self.active = Some(ActiveTask {
            id: id.clone(),
            queue: program.statements().iter().cloned().collect(),
            motion: None,
        });
        self.velocity = Vec3::ZERO;
        self.advance_queue();
        let status = self.tasks[&id].status;
        Ok(Submitted::Task(TaskHandle { task_id: id, status }))
    }

    fn preempt_active(&mut self) {
        if let Some(active) = self.active.take() {
            if let Some(rec) = self.tasks.get_mut(&active.id) {
                rec.status = TaskStatus::Preempted;
            }
            self.velocity = Vec3::ZERO;
        }
    }

    fn finish_active(&mut self, status: TaskStatus) {
        if let Some(active) = self.active.take() {
            if let Some(rec) = self.tasks.get_mut(&active.id) {
                rec.status = status;
            }
        }
        self.velocity = Vec3::ZERO;
    }

    /// Runs instant statements until a motion starts or the queue drains.
    fn advance_queue(&mut self) {
        loop {
            let Some(active) = self.active.as_mut() else {
                return;
            };
            if active.motion.is_some() {
                return;
            }
            let Some(cmd) = active.queue.pop_front() else {
                self.finish_active(TaskStatus::Completed);
                return;
            };
            let id = active.id.clone();
            let tick = self.tick;
            let model = self.cfg.motion;
            if cmd.is_move() && self.landed {
                if model.auto_takeoff {
                    let active = self.active.as_mut().expect("active task");
                    active.queue.push_front(cmd);
                    active.queue.push_front(Command::Takeoff);
                    continue;
                }
                self.finish_active(TaskStatus::Rejected);
                return;
            }
            let motion = match cmd {
                Command::GetGpsData | Command::GetState | Command::GetImage { .. } => {
                    match self.query(&cmd) {
                        Ok(Some(result)) => {
                            if let Some(rec) = self.tasks.get_mut(&id) {
                                rec.results.push(result);
                            }
                        }
                        _ => {
                            self.finish_active(TaskStatus::Rejected);
                            return;
                        }
                    }
                    None
                }
                Command::Reset => {
                    self.reset_kinematics();
                    None
                }
                Command::Hover => {
                    self.velocity = Vec3::ZERO;
                    None
                }
                Command::Takeoff if self.landed => {
                    self.landed = false;
                    let target = Vec3::new(self.position.x, self.position.y, -model.takeoff_altitude);
                    Some(Motion::Line {
                        origin: self.position,
                        target,
                        speed: model.vertical_speed,
                        start_tick: tick,
                        snap: DEADLINE_EPS,
                        lands: false,
                    })
                }
                Command::Land if !self.landed => Some(Motion::Line {
                    origin: self.position,
                    target: Vec3::new(self.position.x, self.position.y, 0.0),
                    speed: model.vertical_speed,
                    start_tick: tick,
                    snap: DEADLINE_EPS,
                    lands: true,
                }),
                Command::Takeoff | Command::Land => None,
                Command::MoveByVelocity { vx, vy, vz, duration } => Some(Motion::Velocity {
                    origin: self.position,
                    velocity: Vec3::new(vx, vy, vz),
                    start_tick: tick,
                    duration,
                }),
                Command::MoveToPosition { x, y, z, speed } => {
                    let target = Vec3::new(x, y, z);
                    (target != self.position).then_some(Motion::Line {
                        origin: self.position,
                        target,
                        speed,
                        start_tick: tick,
                        snap: model.arrival_tolerance,
                        lands: false,
                    })
                }
                Command::RotateToYaw { yaw } => {
                    if angular_distance(yaw, self.yaw) == 0.0 {
                        self.yaw = yaw;
                        None
                    } else {
                        Some(Motion::Yaw { target: yaw })
                    }
                }
            };
            self.active.as_mut().expect("active task").motion = motion;
        }
    }

    /// Advances the clock by one fixed step and moves the vehicle along the
    /// active motion, if any.
    pub fn step(&mut self) {
        self.tick += 1;
        let dt = self.cfg.dt;
        let yaw_rate = self.cfg.motion.yaw_rate;
        let tick = self.tick;
        let Some(motion) = self.active.as_ref().and_then(|a| a.motion.clone()) else {
            self.velocity = Vec3::ZERO;
            return;
        };
        let done = match motion {
            Motion::Velocity {
                origin,
                velocity,
                start_tick,
                duration,
            } => {
                let elapsed = (tick - start_tick) as f64 * dt;
                if elapsed + DEADLINE_EPS >= duration {
                    self.position = origin + velocity * duration;
                    true
                } else {
                    self.position = origin + velocity * elapsed;
                    self.velocity = velocity;
                    false
                }
            }
            Motion::Line {
                origin,
                target,
                speed,
                start_tick,
                snap,
                ..
            } => {
                let total = (target - origin).norm();
                let travelled = speed * (tick - start_tick) as f64 * dt;
                if total - travelled <= snap {
                    self.position = target;
                    true
                } else {
                    let f = travelled / total;
                    self.position = clamp_to_segment(origin + (target - origin) * f, origin, target);
                    self.velocity = (target - origin) * (speed / total);
                    false
                }
            }
            Motion::Yaw { target } => {
                let step = yaw_rate * dt;
                let delta = crate::dsl::wrap_degrees(target - self.yaw);
                if delta.abs() <= step {
                    self.yaw = target;
                    true
                } else {
                    self.yaw = crate::dsl::wrap_degrees(self.yaw + step.copysign(delta));
                    false
                }
            }
        };
        if done {
            self.velocity = Vec3::ZERO;
            if let Motion::Line { lands: true, .. } = motion {
                self.landed = true;
            }
            if let Some(active) = self.active.as_mut() {
                active.motion = None;
            }
            self.advance_queue();
        }
    }

    /// Steps until no task is active or `max_sim_seconds` have elapsed.
    pub fn run_until_idle(&mut self, max_sim_seconds: f64) -> Result<(), Timeout> {
        let limit_ticks = (max_sim_seconds / self.cfg.dt).ceil() as u64;
        let mut ticks = 0;
        while self.is_busy() {
            if ticks >= limit_ticks {
                return Err(Timeout {
                    limit: max_sim_seconds,
                });
            }
            self.step();
            ticks += 1;
        }
        Ok(())
    }
}

fn clamp_to_segment(p: Vec3, a: Vec3, b: Vec3) -> Vec3 {
    let c = |v: f64, lo: f64, hi: f64| v.clamp(lo.min(hi), lo.max(hi));
    Vec3::new(c(p.x, a.x, b.x), c(p.y, a.y, b.y), c(p.z, a.z, b.z))
}
