use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::{message_pass, run_to_convergence, Convergence, MessageSet};
use crate::params::{GradientStore, ParameterStore};
use crate::potentials::{backward_batch, evaluate_batch, loss_augment, PotentialModel, PotentialTables};
use crate::region::RegionGraph;

use super::objective::{evaluate, gradient_step, table_gradient, TargetDistribution};
use super::{Algorithm, Sample, Strategy, TrainConfig};

/// Stream used for the epoch shuffles, separate from parameter init.
const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Unary pretraining on the graph stripped to unary regions.
    Pretrain,
    Main,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Pretrain => "pretrain",
            Phase::Main => "main",
        })
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub phase: Phase,
    pub iteration: usize,
    /// Batch objective at the messages used for the gradient.
    pub objective: f64,
    pub step_size: f64,
    pub val_word: Option<f64>,
    pub val_char: Option<f64>,
}

impl TraceRow {
    pub const HEADER: &'static str = "phase\titeration\tobjective\tstep_size\tval_word\tval_char";

    pub fn to_tsv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into());
        format!(
            "{}\t{}\t{:.12e}\t{:e}\t{}\t{}",
            self.phase,
            self.iteration,
            self.objective,
            self.step_size,
            opt(self.val_word),
            opt(self.val_char)
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: ParameterStore,
    pub velocity: GradientStore,
    /// One message set per training sample, warm-started across updates.
    pub messages: Vec<MessageSet>,
    pub iteration: usize,
    pub step_size: f64,
    pub best_metric: Option<f64>,
    pub trace: Vec<TraceRow>,
}

impl TrainState {
    pub fn new(graph: &RegionGraph, params: ParameterStore, samples: usize, config: &TrainConfig) -> Self {
        Self {
            velocity: params.zeros_like(),
            params,
            messages: vec![MessageSet::zeros(graph, config.epsilon); samples],
            iteration: 0,
            step_size: config.step_size,
            best_metric: None,
            trace: Vec::new(),
        }
    }
}

/// Halves (by `decay`) the step size when `metric` is strictly below the best
/// seen so far; the best is updated to the maximum.
pub fn step_decay_on_validation(state: &mut TrainState, metric: f64, decay: f64) {
    match state.best_metric {
        Some(best) if metric < best => state.step_size *= decay,
        Some(best) if metric <= best => {}
        _ => state.best_metric = Some(metric),
    }
}

/// Stateful loop over mini-batches, one weight update per [`Trainer::step`].
pub struct Trainer<'a> {
    graph: &'a RegionGraph,
    model: &'a PotentialModel,
    train: &'a [Sample],
    validation: &'a [Sample],
    config: TrainConfig,
    frozen: Vec<bool>,
    sweeps: usize,
    reset: bool,
    phase: Phase,
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
    state: TrainState,
}

impl<'a> Trainer<'a> {
    pub fn new(
        graph: &'a RegionGraph,
        model: &'a PotentialModel,
        train: &'a [Sample],
        params: ParameterStore,
        config: &TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        graph.ensure_valid(config.epsilon)?;
        model.check_compatible(graph)?;
        if train.is_empty() {
            return Err(Error::InvalidArgument("training set is empty".into()));
        }
        for s in train {
            graph.space().check_assignment(&s.y)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(SHUFFLE_STREAM);
        let (sweeps, reset) = match config.algorithm {
            Algorithm::Blended => (1, false),
            Algorithm::DoubleLoop => (config.message_sweeps_per_update, true),
        };
        Ok(Self {
            graph,
            model,
            train,
            validation: &[],
            frozen: vec![false; params.len()],
            state: TrainState::new(graph, params, train.len(), config),
            config: config.clone(),
            sweeps,
            reset,
            phase: Phase::Main,
            order: Vec::new(),
            cursor: 0,
            rng,
        })
    }

    /// Validation samples checked every `validate_every` iterations.
    pub fn with_validation(mut self, validation: &'a [Sample]) -> Self {
        self.validation = validation;
        self
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    /// Overrides the message schedule: `sweeps` per update, optionally
    /// resetting the messages first.
    pub fn with_schedule(mut self, sweeps: usize, reset: bool) -> Self {
        self.sweeps = sweeps;
        self.reset = reset;
        self
    }

    /// Parameters whose names satisfy `pred` are never updated.
    pub fn freeze(mut self, pred: impl Fn(&str) -> bool) -> Self {
        for (f, name) in self.frozen.iter_mut().zip(self.state.params.names()) {
            *f |= pred(name);
        }
        self
    }

    pub fn with_step_size(mut self, step_size: f64) -> Self {
        self.state.step_size = step_size;
        self
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    fn next_batch(&mut self) -> Vec<usize> {
        if self.cursor >= self.order.len() {
            self.order = (0..self.train.len()).collect();
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let end = (self.cursor + self.config.batch_size).min(self.order.len());
        let batch = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        batch
    }

    /// Potentials, message sweeps, gradient and one weight update on the next
    /// mini-batch. Returns the batch objective.
    pub fn step(&mut self) -> Result<f64> {
        let batch = self.next_batch();
        let inputs: Vec<_> = batch.iter().map(|&i| &self.train[i].x).collect();
        let (tables, cache) = evaluate_batch(self.graph, self.model, &self.state.params, &inputs)?;

        let graph = self.graph;
        let weight = self.config.loss_augment_weight;
        let (sweeps, reset) = (self.sweeps, self.reset);
        let mut msgs: Vec<MessageSet> = batch.iter().map(|&i| self.state.messages[i].clone()).collect();
        let results: Vec<(f64, PotentialTables)> = msgs
            .par_iter_mut()
            .zip(tables.par_iter())
            .zip(batch.par_iter())
            .map(|((m, t), &i)| {
                let y = &self.train[i].y;
                if reset {
                    m.reset();
                }
                let aug = loss_augment(graph, t, y, weight);
                message_pass(graph, &aug, m, sweeps);
                table_gradient(graph, t, m, y, &TargetDistribution::point_mass(graph, y), weight)
            })
            .collect();
        for (&i, m) in batch.iter().zip(msgs) {
            self.state.messages[i] = m;
        }

        let mut objective = 0.0;
        let mut table_grads = Vec::with_capacity(results.len());
        for (o, g) in results {
            objective += o;
            table_grads.push(g);
        }
        if !objective.is_finite() {
            return Err(Error::NonFiniteObjective(self.state.iteration));
        }
        let mut grads = self.state.params.zeros_like();
        backward_batch(graph, self.model, &cache, &table_grads, &mut grads)?;
        gradient_step(
            &mut self.state.params,
            &mut self.state.velocity,
            &grads,
            self.state.step_size,
            self.config.momentum,
            &self.frozen,
        )?;
        self.state.iteration += 1;

        let mut row = TraceRow {
            phase: self.phase,
            iteration: self.state.iteration,
            objective,
            step_size: self.state.step_size,
            val_word: None,
            val_char: None,
        };
        let every = self.config.validate_every;
        if every > 0 && !self.validation.is_empty() && self.state.iteration % every == 0 {
            let acc = evaluate(
                graph,
                self.model,
                &self.state.params,
                self.validation,
                self.config.epsilon,
                self.config.eval_sweeps,
            )?;
            step_decay_on_validation(&mut self.state, acc.char, self.config.step_decay);
            row.val_word = Some(acc.word);
            row.val_char = Some(acc.char);
        }
        self.state.trace.push(row);
        Ok(objective)
    }

    /// Runs `iterations` steps.
    pub fn run(&mut self, iterations: usize) -> Result<()> {
        for _ in 0..iterations {
            self.step()?;
        }
        Ok(())
    }

    /// Objective over `samples` at the current weights with fresh messages
    /// run to convergence (or `rule.max_sweeps`).
    pub fn converged_objective(&self, samples: &[Sample], rule: Convergence) -> Result<f64> {
        converged_objective(self.graph, self.model, &self.state.params, samples, self.config.epsilon, rule)
    }
}

/// `Σ [dual − F(truth)]` with messages run to convergence from zero.
pub fn converged_objective(
    graph: &RegionGraph,
    model: &PotentialModel,
    params: &ParameterStore,
    samples: &[Sample],
    epsilon: f64,
    rule: Convergence,
) -> Result<f64> {
    let inputs: Vec<_> = samples.iter().map(|s| &s.x).collect();
    let (tables, _) = evaluate_batch(graph, model, params, &inputs)?;
    Ok(tables
        .par_iter()
        .zip(samples.par_iter())
        .map(|(t, s)| {
            let mut m = MessageSet::zeros(graph, epsilon);
            let report = run_to_convergence(graph, t, &mut m, rule);
            report.dual - TargetDistribution::point_mass(graph, &s.y).expected_score(t)
        })
        .sum())
}

fn train_with(
    graph: &RegionGraph,
    model: &PotentialModel,
    params: ParameterStore,
    train: &[Sample],
    config: &TrainConfig,
    algorithm: Algorithm,
) -> Result<TrainState> {
    let config = TrainConfig {
        algorithm,
        ..config.clone()
    };
    let mut t = Trainer::new(graph, model, train, params, &config)?;
    t.run(config.max_iterations)?;
    Ok(t.into_state())
}

/// One warm-started sweep per sample per weight update.
pub fn train_blended(
    graph: &RegionGraph,
    model: &PotentialModel,
    params: ParameterStore,
    train: &[Sample],
    config: &TrainConfig,
) -> Result<TrainState> {
    train_with(graph, model, params, train, config, Algorithm::Blended)
}

/// Messages reset and swept `message_sweeps_per_update` times per update.
pub fn train_double_loop(
    graph: &RegionGraph,
    model: &PotentialModel,
    params: ParameterStore,
    train: &[Sample],
    config: &TrainConfig,
) -> Result<TrainState> {
    train_with(graph, model, params, train, config, Algorithm::DoubleLoop)
}

/// Initializes parameters from `config.seed` and trains according to
/// `config.strategy`. The returned trace covers all phases.
pub fn run_strategy(
    graph: &RegionGraph,
    model: &PotentialModel,
    train: &[Sample],
    validation: &[Sample],
    config: &TrainConfig,
) -> Result<TrainState> {
    run_strategy_observed(graph, model, train, validation, config, &mut |_, _| {})
}

fn drive(t: &mut Trainer<'_>, iterations: usize, observer: &mut dyn FnMut(&TraceRow, &ParameterStore)) -> Result<()> {
    for _ in 0..iterations {
        t.step()?;
        let state = t.state();
        if let Some(row) = state.trace.last() {
            observer(row, &state.params);
        }
    }
    Ok(())
}

/// Parameters before the first update of `config.strategy`: seeded random
/// initialization, with pairwise tensors zeroed for `UnaryOnly`.
pub fn initial_params(model: &PotentialModel, config: &TrainConfig) -> Result<ParameterStore> {
    let mut params = model.init_params(&mut ChaCha8Rng::seed_from_u64(config.seed))?;
    if config.strategy == Strategy::UnaryOnly {
        for name in model.pairwise_param_names() {
            if let Some(t) = params.get_mut(&name) {
                t.fill(0.0);
            }
        }
    }
    Ok(params)
}

/// [`run_strategy`], calling `observer` with each new trace row and the
/// parameters after that update.
pub fn run_strategy_observed(
    graph: &RegionGraph,
    model: &PotentialModel,
    train: &[Sample],
    validation: &[Sample],
    config: &TrainConfig,
    observer: &mut dyn FnMut(&TraceRow, &ParameterStore),
) -> Result<TrainState> {
    config.validate()?;
    let mut params = initial_params(model, config)?;
    let pairwise = model.pairwise_param_names();
    let is_pairwise = |n: &str| pairwise.iter().any(|p| p == n);

    match config.strategy {
        Strategy::UnaryOnly => {
            let mut t = Trainer::new(graph, model, train, params, config)?
                .with_validation(validation)
                .freeze(is_pairwise);
            drive(&mut t, config.max_iterations, observer)?;
            Ok(t.into_state())
        }
        Strategy::JointTrain => {
            let mut t = Trainer::new(graph, model, train, params, config)?.with_validation(validation);
            drive(&mut t, config.max_iterations, observer)?;
            Ok(t.into_state())
        }
        Strategy::PwTrain | Strategy::PreTrainJoint => {
            let unary_graph = graph.unary_subgraph();
            let pre_config = TrainConfig {
                algorithm: Algorithm::Blended,
                ..config.clone()
            };
            let mut pre = Trainer::new(&unary_graph, model, train, params, &pre_config)?
                .with_validation(validation)
                .with_phase(Phase::Pretrain)
                .freeze(is_pairwise);
            drive(&mut pre, config.pretrain_iterations, observer)?;
            let pre_state = pre.into_state();
            params = pre_state.params;

            let main = Trainer::new(graph, model, train, params, config)?
                .with_validation(validation);
            let mut main = if config.strategy == Strategy::PwTrain {
                main.freeze(|n| !is_pairwise(n))
            } else {
                main.with_step_size(config.pretrained_step_size)
            };
            drive(&mut main, config.max_iterations, observer)?;
            let mut state = main.into_state();
            let mut trace = pre_state.trace;
            trace.append(&mut state.trace);
            state.trace = trace;
            Ok(state)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(step: f64) -> TrainState {
        TrainState {
            params: ParameterStore::new(),
            velocity: ParameterStore::new().zeros_like(),
            messages: vec![],
            iteration: 0,
            step_size: step,
            best_metric: None,
            trace: vec![],
        }
    }

    #[test]
    fn decay_on_improving_sequence_is_a_no_op() {
        let mut s = state(0.01);
        for m in [0.5, 0.6, 0.7] {
            step_decay_on_validation(&mut s, m, 0.5);
        }
        assert_eq!(s.step_size, 0.01);
        assert_eq!(s.best_metric, Some(0.7));
    }

    #[test]
    fn decrease_halves_once() {
        let mut s = state(0.01);
        step_decay_on_validation(&mut s, 0.7, 0.5);
        step_decay_on_validation(&mut s, 0.6, 0.5);
        assert_eq!(s.step_size, 0.005);
        assert_eq!(s.best_metric, Some(0.7));
    }

    #[test]
    fn equal_metric_does_not_decay() {
        let mut s = state(0.01);
        step_decay_on_validation(&mut s, 0.7, 0.5);
        step_decay_on_validation(&mut s, 0.7, 0.5);
        assert_eq!(s.step_size, 0.01);
    }

    #[test]
    fn trace_row_formats_missing_metrics() {
        let row = TraceRow {
            phase: Phase::Main,
            iteration: 3,
            objective: 1.5,
            step_size: 0.01,
            val_word: None,
            val_char: Some(0.25),
        };
        let line = row.to_tsv();
        assert_eq!(line.split('\t').count(), TraceRow::HEADER.split('\t').count());
        assert!(line.starts_with("main\t3\t"));
        assert!(line.ends_with("\t-\t0.250000"));
    }
}
