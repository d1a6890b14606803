//! Noise schedules and score models for the variance-exploding diffusion
//! prior.

pub mod net;
pub mod schedule;
pub mod score;
pub mod weights;

pub use net::ScoreNet;
pub use schedule::{SigmaSchedule, StepSchedule};
pub use score::{GaussianMixtureScore, GaussianPriorScore, ScoreFunction, ZeroScore};
pub use weights::{load_weights, NetArch, ScoreNetWeights, WeightFile, WeightTensor};
