//! Joint training of neural-network potentials and Markov random fields.
//!
//! Potentials `f_r(x, ŷ_r; w)` come from a small differentiable
//! [`graph::ComputationGraph`]; inference is convex message passing on a
//! [`region::RegionGraph`]; learning interleaves single message sweeps with
//! weight updates.

mod codec;
pub mod config;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod inference;
pub mod learning;
pub mod math;
pub mod model_file;
pub mod oracle;
pub mod params;
pub mod potentials;
pub mod region;
pub mod suites;
pub mod tensor;

pub use config::{parse as parse_config, Instance, ModelSpecDoc};
pub use error::{ConfigError, Error, Result};
pub use graph::{ComputationGraph, NodeId, NodeKind, ShapeSpec};
pub use inference::{BeliefSet, Convergence, MessageSet};
pub use learning::{Accuracy, Algorithm, Sample, Strategy, TrainConfig, TrainState};
pub use params::{GradientStore, ParameterStore};
pub use potentials::{PairwiseKind, PairwiseModel, PotentialModel, PotentialTables};
pub use region::{build_chain_model, RegionGraph, VariableSpace};
pub use tensor::TensorValue;
pub use model_file::{read_model, write_model, SavedModel};
