//! Training: the blended single-sweep algorithm, the double-loop baseline,
//! and the four training strategies.

mod objective;
mod trainer;

pub use objective::{
    compute_gradient, evaluate, evaluate_with, gradient_step, objective_value, Accuracy,
    GradientResult, TargetDistribution,
};
pub use trainer::{
    converged_objective, initial_params, run_strategy, run_strategy_observed, step_decay_on_validation, train_blended, train_double_loop, Phase, TraceRow,
    Trainer, TrainState,
};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::TensorValue;

/// One labelled input: `x` is `[N, D]` (one row per variable slot), `y` the
/// 0-based ground-truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: TensorValue,
    pub y: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Pairwise parameters frozen at zero.
    UnaryOnly,
    /// Everything from random initialization, jointly.
    JointTrain,
    /// Pretrain unaries, freeze them, then fit the pairwise parameters.
    PwTrain,
    /// Pretrain unaries, then train everything at a reduced step size.
    PreTrainJoint,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::UnaryOnly,
        Strategy::JointTrain,
        Strategy::PwTrain,
        Strategy::PreTrainJoint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::UnaryOnly => "unary",
            Strategy::JointTrain => "joint",
            Strategy::PwTrain => "pw",
            Strategy::PreTrainJoint => "pretrainjoint",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unary" | "unaryonly" | "unary-only" => Ok(Strategy::UnaryOnly),
            "joint" | "jointtrain" => Ok(Strategy::JointTrain),
            "pw" | "pwtrain" => Ok(Strategy::PwTrain),
            "pretrainjoint" | "pretrain-joint" => Ok(Strategy::PreTrainJoint),
            _ => Err(Error::InvalidArgument(format!(
                "unknown strategy `{s}` (unary | joint | pw | pretrainjoint)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// One warm-started sweep per weight update.
    Blended,
    /// Messages reset and swept `message_sweeps_per_update` times per update.
    DoubleLoop,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Blended => "blended",
            Algorithm::DoubleLoop => "doubleloop",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "blended" => Ok(Algorithm::Blended),
            "doubleloop" | "double-loop" => Ok(Algorithm::DoubleLoop),
            _ => Err(Error::InvalidArgument(format!(
                "unknown algorithm `{s}` (blended | doubleloop)"
            ))),
        }
    }
}

/// Hyperparameters. The gradient is summed over the mini-batch, so
/// `step_size` applies to the summed batch gradient: the default `1e-4`
/// equals `0.01` on a batch-averaged gradient of 100 samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epsilon: f64,
    pub step_size: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_iterations: usize,
    /// Sweeps per weight update in double-loop mode.
    pub message_sweeps_per_update: usize,
    pub step_decay: f64,
    pub strategy: Strategy,
    pub algorithm: Algorithm,
    pub loss_augment_weight: f64,
    pub seed: u64,
    /// Unary pretraining budget for `PwTrain` / `PreTrainJoint`.
    pub pretrain_iterations: usize,
    /// Initial step size of the joint phase after pretraining.
    pub pretrained_step_size: f64,
    /// Iterations between validation checks; 0 disables them.
    pub validate_every: usize,
    /// Sweeps used to decode at evaluation time.
    pub eval_sweeps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            step_size: 1e-4,
            momentum: 0.95,
            batch_size: 100,
            max_iterations: 2000,
            message_sweeps_per_update: 20,
            step_decay: 0.5,
            strategy: Strategy::JointTrain,
            algorithm: Algorithm::Blended,
            loss_augment_weight: 0.0,
            seed: 0,
            pretrain_iterations: 5000,
            pretrained_step_size: 1e-5,
            validate_every: 100,
            eval_sweeps: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return bad(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        if !(self.step_size > 0.0) || !(self.pretrained_step_size > 0.0) {
            return bad("step sizes must be > 0".into());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if self.batch_size == 0 {
            return bad("batch size must be >= 1".into());
        }
        if !(self.step_decay > 0.0 && self.step_decay <= 1.0) {
            return bad(format!("step decay must lie in (0, 1], got {}", self.step_decay));
        }
        if !(self.loss_augment_weight >= 0.0) {
            return bad("loss augmentation weight must be >= 0".into());
        }
        Ok(())
    }

    /// `ε = 0`: the structured hinge loss.
    pub fn is_hinge(&self) -> bool {
        self.epsilon == 0.0
    }
}
