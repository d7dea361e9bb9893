//! Deterministic surrogate grasping environment.
//!
//! The hand follows a prepared (time-warped, offset, resampled) trajectory
//! while the agent commands the finger closure rate. A small set of rules
//! stands in for contact physics: closing inside the collision band topples
//! the object, closing within grasp range attaches it, an attached object is
//! carried while the closure is firm and drops otherwise.
//!
//! Reward: after the first step at which the hand or the object rises above
//! `z_trig`, each of the next 20 steps pays 1 if the object is above
//! `z_trig`. The maximum return is therefore 20.

mod physics;
mod record;

pub use physics::PhysicsConstants;
pub use record::{read_episode_log, rollout, EpisodeRecord, Transition};

use crate::traj::{self, Pose, TrajError, TrajectorySet, Vec3};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

/// Number of countdown steps after the trigger; also the maximum return.
pub const REWARD_WINDOW: usize = 20;
/// Dimension of [`StateVector`].
pub const STATE_DIM: usize = 21;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("unknown trajectory id {0}")]
    UnknownTrajectory(usize),
    #[error("step called after the episode finished")]
    SteppedAfterDone,
    #[error("step called before reset")]
    NotReset,
    #[error("invalid physics constants: {0}")]
    InvalidPhysics(String),
    #[error(transparent)]
    Trajectory(#[from] TrajError),
}

/// One sampled environment instance: base trajectory, offset and time noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvSettings {
    pub trajectory_id: usize,
    pub dx: f64,
    pub dy: f64,
    pub tn: f64,
    pub physics: PhysicsConstants,
    pub seed: u64,
}

/// Observation handed to learners: hand position (3), hand quaternion (4),
/// hand linear velocity (3), hand angular velocity (3), closure, closure
/// rate, object position (3), object velocity (3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector(pub [f64; STATE_DIM]);

impl StateVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn hand_position(&self) -> Vec3 {
        [self.0[0], self.0[1], self.0[2]]
    }

    pub fn closure(&self) -> f64 {
        self.0[13]
    }

    pub fn object_position(&self) -> Vec3 {
        [self.0[15], self.0[16], self.0[17]]
    }
}

/// Full simulator state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub step: usize,
    pub hand: Pose,
    pub hand_velocity: Vec3,
    pub hand_angular_velocity: Vec3,
    pub closure: f64,
    pub closure_rate: f64,
    pub object_position: Vec3,
    pub object_velocity: Vec3,
    pub attached: bool,
    pub toppled: bool,
    /// Hand-object distance at reset.
    pub initial_distance: f64,
}

impl EnvState {
    pub fn hand_object_distance(&self) -> f64 {
        dist(self.hand.position, self.object_position)
    }

    pub fn observation(&self) -> StateVector {
        let p = self.hand.position;
        let q = self.hand.orientation;
        let v = self.hand_velocity;
        let w = self.hand_angular_velocity;
        let o = self.object_position;
        let ov = self.object_velocity;
        StateVector([
            p[0], p[1], p[2], q.w, q.x, q.y, q.z, v[0], v[1], v[2], w[0], w[1], w[2],
            self.closure, self.closure_rate, o[0], o[1], o[2], ov[0], ov[1], ov[2],
        ])
    }
}

/// Current hand-object distance divided by its value at reset.
pub fn normalized_distance(state: &EnvState) -> f64 {
    if state.initial_distance > 0.0 {
        state.hand_object_distance() / state.initial_distance
    } else {
        state.hand_object_distance()
    }
}

pub(crate) fn dist(a: Vec3, b: Vec3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Anything that maps the simulator state to an action.
pub trait Policy {
    fn act(&mut self, state: &EnvState, obs: &StateVector) -> f64;
}

impl<F: FnMut(&EnvState, &StateVector) -> f64> Policy for F {
    fn act(&mut self, state: &EnvState, obs: &StateVector) -> f64 {
        self(state, obs)
    }
}

/// Result of a single step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub obs: StateVector,
    pub reward: f64,
    pub done: bool,
}

/// Prepare the hand path for `settings`: warp, offset, resample.
pub fn prepare_path(trajectories: &TrajectorySet, settings: &EnvSettings) -> Result<Vec<Pose>, EnvError> {
    let base = trajectories
        .get(settings.trajectory_id)
        .ok_or(EnvError::UnknownTrajectory(settings.trajectory_id))?;
    let p = &settings.physics;
    let warped = traj::time_warp(base, p.time_scale, settings.tn)?;
    let shifted = traj::apply_offset(&warped, settings.dx, settings.dy);
    let uniform = traj::resample(&shifted, p.dt)?;
    Ok(uniform.poses().copied().collect())
}

/// A single-threaded environment instance.
#[derive(Debug, Clone)]
pub struct Env {
    trajectories: Arc<TrajectorySet>,
    physics: PhysicsConstants,
    path: Vec<Pose>,
    state: Option<EnvState>,
    trigger_step: Option<usize>,
    done: bool,
    grip_offset: Vec3,
    attach_step: Option<usize>,
    closest: (usize, f64),
}

impl Env {
    pub fn new(trajectories: Arc<TrajectorySet>) -> Self {
        Self {
            trajectories,
            physics: PhysicsConstants::default(),
            path: Vec::new(),
            state: None,
            trigger_step: None,
            done: false,
            grip_offset: [0.0; 3],
            attach_step: None,
            closest: (0, f64::INFINITY),
        }
    }

    pub fn trajectories(&self) -> &Arc<TrajectorySet> {
        &self.trajectories
    }

    /// Start an episode. The object sits at the world origin and the hand is
    /// fully open.
    pub fn reset(&mut self, settings: &EnvSettings) -> Result<StateVector, EnvError> {
        settings.physics.validate().map_err(EnvError::InvalidPhysics)?;
        self.path = prepare_path(&self.trajectories, settings)?;
        self.physics = settings.physics;
        let hand = self.path[0];
        let object = [0.0; 3];
        let d0 = dist(hand.position, object);
        let state = EnvState {
            step: 0,
            hand,
            hand_velocity: [0.0; 3],
            hand_angular_velocity: [0.0; 3],
            closure: 0.0,
            closure_rate: 0.0,
            object_position: object,
            object_velocity: [0.0; 3],
            attached: false,
            toppled: false,
            initial_distance: d0,
        };
        self.state = Some(state);
        self.trigger_step = None;
        self.done = false;
        self.grip_offset = [0.0; 3];
        self.attach_step = None;
        self.closest = (0, d0);
        Ok(state.observation())
    }

    pub fn state(&self) -> Option<&EnvState> {
        self.state.as_ref()
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Number of samples in the prepared hand path.
    pub fn path_len(&self) -> usize {
        self.path.len()
    }

    pub fn trigger_step(&self) -> Option<usize> {
        self.trigger_step
    }

    pub fn attach_step(&self) -> Option<usize> {
        self.attach_step
    }

    /// Step of minimum hand-object distance so far.
    pub fn closest_step(&self) -> usize {
        self.closest.0
    }

    /// Advance one control interval with closure command `action`
    /// (clamped to [-1, 1]; NaN counts as 0).
    pub fn step(&mut self, action: f64) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::SteppedAfterDone);
        }
        let p = self.physics;
        let prev = self.state.ok_or(EnvError::NotReset)?;
        let a = if action.is_nan() { 0.0 } else { action.clamp(-1.0, 1.0) };
        let mut s = prev;
        let k = prev.step + 1;
        s.step = k;

        // 1. closure
        s.closure = (prev.closure + a * p.v_close * p.dt).clamp(0.0, 1.0);
        s.closure_rate = (s.closure - prev.closure) / p.dt;

        // 2. hand transport; frozen on the last pose once the path runs out
        s.hand = self.path[k.min(self.path.len() - 1)];
        s.hand_velocity = std::array::from_fn(|i| (s.hand.position[i] - prev.hand.position[i]) / p.dt);
        let rel = prev.hand.orientation.conj() * s.hand.orientation.aligned_to(prev.hand.orientation);
        let l = rel.log();
        s.hand_angular_velocity = std::array::from_fn(|i| 2.0 * l[i] / p.dt);

        // 3. grasp rules
        let d = dist(s.hand.position, s.object_position);
        let aperture = p.aperture(s.closure);
        let diameter = 2.0 * p.r_obj;
        if !s.attached && !s.toppled && d > p.d_grasp && d <= p.d_contact && aperture < diameter {
            s.toppled = true;
        }
        if !s.attached && !s.toppled && d <= p.d_grasp && aperture <= diameter {
            s.attached = true;
            self.grip_offset = std::array::from_fn(|i| s.hand.position[i] - s.object_position[i]);
            self.attach_step.get_or_insert(k);
        }
        if s.attached {
            if s.closure >= p.h_hold {
                for i in 0..3 {
                    s.object_position[i] = s.hand.position[i] - self.grip_offset[i];
                }
                s.object_position[2] = s.object_position[2].max(0.0);
            } else {
                s.attached = false;
                s.object_position[2] = 0.0;
            }
        }
        s.object_velocity =
            std::array::from_fn(|i| (s.object_position[i] - prev.object_position[i]) / p.dt);

        let dh = s.hand_object_distance();
        if dh < self.closest.1 {
            self.closest = (k, dh);
        }

        // 4. reward
        let mut reward = 0.0;
        match self.trigger_step {
            None => {
                if s.hand.position[2] > p.z_trig || s.object_position[2] > p.z_trig {
                    self.trigger_step = Some(k);
                } else if k + 1 >= self.path.len() {
                    self.done = true;
                }
            }
            Some(t0) => {
                if s.object_position[2] > p.z_trig {
                    reward = 1.0;
                }
                if k >= t0 + REWARD_WINDOW {
                    self.done = true;
                }
            }
        }

        self.state = Some(s);
        Ok(StepOutcome { obs: s.observation(), reward, done: self.done })
    }
}
