//! Function approximators and learners: SAC with demonstrations, plain SAC
//! and behavior cloning.

pub mod adam;
pub mod bc;
pub mod buffer;
pub mod checkpoint;
pub mod nn;
pub mod policy;
pub mod rlil;
pub mod sac;

pub use adam::Adam;
pub use buffer::{sample_mixed_batch, Batch, BufferError, ReplayBuffer};
pub use nn::{Mlp, NnError, Tape};
pub use policy::GaussianPolicy;
pub use sac::{SacAgent, SacConfig, SacLosses, SacNets};
pub use rlil::{evaluate, train_rlil, CurvePoint, LearnError, RlilConfig, TrainOutput};
pub use bc::{train_bc, BcConfig, BcDataset, BcOutput};
pub use checkpoint::{CheckpointError, PolicyCheckpoint};
