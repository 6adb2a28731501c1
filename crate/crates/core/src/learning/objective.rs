use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::{beliefs_from_messages, dual_objective, map_decode, message_pass, MessageSet};
use crate::params::{GradientStore, ParameterStore};
use crate::potentials::{backward_batch, evaluate_batch, loss_augment, PotentialModel, PotentialTables};
use crate::region::RegionGraph;

use super::Sample;

/// Per-region target distributions; the default is the point mass on the
/// ground truth's restriction.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetDistribution {
    regions: Vec<Vec<f64>>,
}

impl TargetDistribution {
    pub fn point_mass(graph: &RegionGraph, y: &[usize]) -> Self {
        let regions = (0..graph.len())
            .map(|r| {
                let mut t = vec![0.0; graph.table_size(r)];
                t[graph.local_index(r, y)] = 1.0;
                t
            })
            .collect();
        Self { regions }
    }

    /// Arbitrary per-region targets; each must lie on the simplex.
    pub fn from_regions(graph: &RegionGraph, regions: Vec<Vec<f64>>) -> Result<Self> {
        if regions.len() != graph.len() {
            return Err(Error::InvalidArgument("one target per region is required".into()));
        }
        for (r, t) in regions.iter().enumerate() {
            let sum: f64 = t.iter().sum();
            if t.len() != graph.table_size(r) || t.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidArgument(format!("target of region {r} is not a distribution")));
            }
        }
        Ok(Self { regions })
    }

    pub fn region(&self, r: usize) -> &[f64] {
        &self.regions[r]
    }

    /// `Σ_r ⟨target_r, f_r⟩`, which is `F(x, y; w)` for a point mass.
    pub fn expected_score(&self, tables: &PotentialTables) -> f64 {
        self.regions
            .iter()
            .zip(tables.tables())
            .map(|(t, f)| t.iter().zip(f).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }
}

/// `Σ_samples [ dual(x, λ) − F(x, y; w) ]` at fixed messages. With a positive
/// `loss_weight` the dual is taken over Hamming-augmented tables.
pub fn objective_value(
    graph: &RegionGraph,
    model: &PotentialModel,
    params: &ParameterStore,
    samples: &[&Sample],
    messages: &[MessageSet],
    loss_weight: f64,
) -> Result<f64> {
    let inputs: Vec<_> = samples.iter().map(|s| &s.x).collect();
    let (tables, _) = evaluate_batch(graph, model, params, &inputs)?;
    Ok(samples
        .iter()
        .zip(&tables)
        .zip(messages)
        .map(|((s, t), m)| {
            let aug = loss_augment(graph, t, &s.y, loss_weight);
            dual_objective(graph, &aug, m) - TargetDistribution::point_mass(graph, &s.y).expected_score(t)
        })
        .sum())
}

#[derive(Debug, Clone)]
pub struct GradientResult {
    pub objective: f64,
    pub grads: GradientStore,
}

/// `g = Σ b_r(ŷ_r) ∇f_r(ŷ_r) − Σ target_r(ŷ_r) ∇f_r(ŷ_r)` with beliefs read off
/// the given messages, together with the objective at those messages.
pub fn compute_gradient(
    graph: &RegionGraph,
    model: &PotentialModel,
    params: &ParameterStore,
    samples: &[&Sample],
    messages: &[MessageSet],
    loss_weight: f64,
) -> Result<GradientResult> {
    let inputs: Vec<_> = samples.iter().map(|s| &s.x).collect();
    let (tables, cache) = evaluate_batch(graph, model, params, &inputs)?;
    let per_sample: Vec<(f64, PotentialTables)> = samples
        .par_iter()
        .zip(tables.par_iter())
        .zip(messages.par_iter())
        .map(|((s, t), m)| {
            let target = TargetDistribution::point_mass(graph, &s.y);
            table_gradient(graph, t, m, &s.y, &target, loss_weight)
        })
        .collect();
    let mut objective = 0.0;
    let mut table_grads = Vec::with_capacity(per_sample.len());
    for (o, g) in per_sample {
        objective += o;
        table_grads.push(g);
    }
    let mut grads = params.zeros_like();
    backward_batch(graph, model, &cache, &table_grads, &mut grads)?;
    Ok(GradientResult { objective, grads })
}

/// Objective contribution and `∂/∂f_r = b_r − target_r` for one sample.
pub(crate) fn table_gradient(
    graph: &RegionGraph,
    tables: &PotentialTables,
    messages: &MessageSet,
    y: &[usize],
    target: &TargetDistribution,
    loss_weight: f64,
) -> (f64, PotentialTables) {
    let aug = loss_augment(graph, tables, y, loss_weight);
    let beliefs = beliefs_from_messages(graph, &aug, messages);
    let objective = dual_objective(graph, &aug, messages) - target.expected_score(tables);
    let mut g = PotentialTables::zeros(graph);
    for r in 0..graph.len() {
        for ((d, b), t) in g.region_mut(r).iter_mut().zip(beliefs.region(r)).zip(target.region(r)) {
            *d = b - t;
        }
    }
    (objective, g)
}

/// Heavy-ball update `v ← m·v + g`, `w ← w − η·v`, skipping frozen tensors.
pub fn gradient_step(
    params: &mut ParameterStore,
    velocity: &mut GradientStore,
    grads: &GradientStore,
    step_size: f64,
    momentum: f64,
    frozen: &[bool],
) -> Result<()> {
    if let Some((name, index)) = grads.first_non_finite() {
        return Err(Error::NonFiniteGradient {
            parameter: name.to_string(),
            index,
        });
    }
    for (i, (w, g)) in params.tensors_mut().iter_mut().zip(grads.tensors()).enumerate() {
        if frozen.get(i).copied().unwrap_or(false) {
            continue;
        }
        let v = velocity.at_mut(i);
        for ((vv, &gg), ww) in v.data_mut().iter_mut().zip(g.data()).zip(w.data_mut()) {
            *vv = momentum * *vv + gg;
            *ww -= step_size * *vv;
        }
    }
    Ok(())
}

/// Word (all variables right) and character (per variable) accuracy, as
/// fractions in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub word: f64,
    pub char: f64,
}

impl Accuracy {
    pub fn from_predictions(predictions: &[Vec<usize>], truths: &[Vec<usize>]) -> Self {
        let mut words = 0usize;
        let mut chars = 0usize;
        let mut total = 0usize;
        for (p, t) in predictions.iter().zip(truths) {
            let right = p.iter().zip(t).filter(|(a, b)| a == b).count();
            chars += right;
            total += t.len();
            if right == t.len() && p.len() == t.len() {
                words += 1;
            }
        }
        if predictions.is_empty() {
            return Self { word: 0.0, char: 0.0 };
        }
        Self {
            word: words as f64 / predictions.len() as f64,
            char: chars as f64 / total.max(1) as f64,
        }
    }
}

/// Decodes every sample from fresh messages after `sweeps` sweeps and scores
/// the predictions.
pub fn evaluate(
    graph: &RegionGraph,
    model: &PotentialModel,
    params: &ParameterStore,
    samples: &[Sample],
    epsilon: f64,
    sweeps: usize,
) -> Result<Accuracy> {
    let preds = predict(graph, model, params, samples, epsilon, sweeps)?;
    let truths: Vec<Vec<usize>> = samples.iter().map(|s| s.y.clone()).collect();
    Ok(Accuracy::from_predictions(&preds, &truths))
}

/// Same as [`evaluate`] but also returns the predictions.
pub fn evaluate_with(
    graph: &RegionGraph,
    model: &PotentialModel,
    params: &ParameterStore,
    samples: &[Sample],
    epsilon: f64,
    sweeps: usize,
) -> Result<(Accuracy, Vec<Vec<usize>>)> {
    let preds = predict(graph, model, params, samples, epsilon, sweeps)?;
    let truths: Vec<Vec<usize>> = samples.iter().map(|s| s.y.clone()).collect();
    Ok((Accuracy::from_predictions(&preds, &truths), preds))
}

fn predict(
    graph: &RegionGraph,
    model: &PotentialModel,
    params: &ParameterStore,
    samples: &[Sample],
    epsilon: f64,
    sweeps: usize,
) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(256) {
        let inputs: Vec<_> = chunk.iter().map(|s| &s.x).collect();
        let (tables, _) = evaluate_batch(graph, model, params, &inputs)?;
        let preds: Vec<Vec<usize>> = tables
            .par_iter()
            .map(|t| {
                let mut m = MessageSet::zeros(graph, epsilon);
                message_pass(graph, t, &mut m, sweeps);
                map_decode(graph, t, &m)
            })
            .collect();
        out.extend(preds);
    }
    Ok(out)
}
