//! Two-phase proportional closure controller.
//!
//! Far from the object (normalized distance at or above the critical value)
//! the controller drives the closure towards `h_open`; inside it drives the
//! closure towards `h_closed`. Output is clamped to the action range.

use crate::env::{normalized_distance, EnvState, Policy, StateVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertParams {
    /// Proportional gain.
    pub k: f64,
    /// Critical normalized hand-object distance.
    pub d_c: f64,
    pub h_open: f64,
    pub h_closed: f64,
}

impl ExpertParams {
    pub fn new(k: f64, d_c: f64) -> Self {
        Self { k, d_c, h_open: 0.0, h_closed: 0.8 }
    }
}

/// Sampling ranges for the controller family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertBounds {
    pub k: (f64, f64),
    pub d_c: (f64, f64),
    pub h_open: f64,
    pub h_closed: f64,
}

impl Default for ExpertBounds {
    fn default() -> Self {
        Self { k: (1.0, 1.5), d_c: (0.01, 0.90), h_open: 0.0, h_closed: 0.8 }
    }
}

impl ExpertBounds {
    pub fn contains(&self, p: &ExpertParams) -> bool {
        (self.k.0..=self.k.1).contains(&p.k) && (self.d_c.0..=self.d_c.1).contains(&p.d_c)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ExpertParams {
        let k = rng.gen_range(self.k.0..=self.k.1);
        let d_c = rng.gen_range(self.d_c.0..=self.d_c.1);
        ExpertParams { k, d_c, h_open: self.h_open, h_closed: self.h_closed }
    }
}

/// Controller output for closure `h` at normalized distance `d_hat`.
/// The boundary `d_hat == d_c` belongs to the opening phase.
pub fn expert_action(h: f64, d_hat: f64, p: &ExpertParams) -> f64 {
    let target = if d_hat >= p.d_c { p.h_open } else { p.h_closed };
    (p.k * (target - h)).clamp(-1.0, 1.0)
}

/// Draw controller parameters uniformly from the default family.
pub fn sample_params<R: Rng + ?Sized>(rng: &mut R) -> ExpertParams {
    ExpertBounds::default().sample(rng)
}

/// [`Policy`] adapter around a fixed parameter set.
#[derive(Debug, Clone, Copy)]
pub struct ExpertPolicy(pub ExpertParams);

impl Policy for ExpertPolicy {
    fn act(&mut self, state: &EnvState, _obs: &StateVector) -> f64 {
        expert_action(state.closure, normalized_distance(state), &self.0)
    }
}
