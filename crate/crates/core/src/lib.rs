//! Surrogate prosthetic-hand grasping toolkit.
//!
//! Trajectory augmentation, a deterministic rule-based grasping environment,
//! two-phase expert controllers with Monte Carlo search for working
//! controller/environment pairs, SAC with demonstrations, behavior cloning,
//! and a success model that explains policy actions through action sweeps.

pub mod traj;
pub mod config;
pub mod env;
pub mod expert;
pub mod mcsearch;
pub mod learn;
pub mod successmodel;
