//! Region potentials `f_r(x, ŷ_r; w)`: a shared unary network applied per
//! variable slot, plus one pairwise model per edge class.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Activations, ComputationGraph, NodeId, ShapeSpec};
use crate::params::{GradientStore, ParamInit, ParameterStore};
use crate::region::{PotentialBinding, RegionGraph, RegionId};
use crate::tensor::TensorValue;

/// Name of the unary network's input node.
pub const UNARY_INPUT: &str = "x";
const PAIRWISE_INPUT: &str = "one";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairwiseKind {
    /// `f(m, n) = W[m][n]`.
    Linear,
    /// A constant input through `hidden` ReLU units to a `rows × cols` table.
    MlpTable { hidden: usize },
}

/// Pairwise table generator shared by every edge of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseModel {
    pub class: usize,
    pub rows: usize,
    pub cols: usize,
    pub kind: PairwiseKind,
    graph: ComputationGraph,
    output: NodeId,
}

impl PairwiseModel {
    pub fn new(class: usize, rows: usize, cols: usize, kind: PairwiseKind) -> Result<Self> {
        let mut graph = ComputationGraph::new();
        let p = |s: &str| format!("{}.{s}", Self::prefix(class));
        let output = match kind {
            PairwiseKind::Linear => graph.parameter(&p("table"), &p("W"), &[rows, cols])?,
            PairwiseKind::MlpTable { hidden } => {
                if hidden == 0 {
                    return Err(Error::InvalidArgument("pairwise MLP needs hidden units".into()));
                }
                let one = graph.input(PAIRWISE_INPUT, ShapeSpec::fixed(&[1, 1]))?;
                let w1 = graph.parameter(&p("w1"), &p("W1"), &[hidden, 1])?;
                let b1 = graph.parameter(&p("b1"), &p("b1"), &[hidden])?;
                let a1 = graph.affine(&p("a1"), one, w1, b1)?;
                let h1 = graph.relu(&p("h1"), a1)?;
                let w2 = graph.parameter(&p("w2"), &p("W2"), &[rows * cols, hidden])?;
                let b2 = graph.parameter(&p("b2"), &p("b2"), &[rows * cols])?;
                graph.affine(&p("table"), h1, w2, b2)?
            }
        };
        Ok(Self {
            class,
            rows,
            cols,
            kind,
            graph,
            output,
        })
    }

    /// Parameter-name prefix of edge class `class`.
    pub fn prefix(class: usize) -> String {
        format!("pair{class}")
    }

    pub fn graph(&self) -> &ComputationGraph {
        &self.graph
    }

    pub fn parameter_names(&self) -> Vec<String> {
        self.graph.parameters().into_iter().map(|(n, _)| n).collect()
    }

    fn forward(&self, params: &ParameterStore) -> Result<Activations> {
        let inputs = HashMap::from([(
            PAIRWISE_INPUT.to_string(),
            TensorValue::new(vec![1, 1], vec![1.0])?,
        )]);
        self.graph.forward(params, &inputs)
    }

    /// The `rows × cols` table, row-major.
    pub fn table(&self, params: &ParameterStore) -> Result<Vec<f64>> {
        Ok(self.forward(params)?.get(self.output).data().to_vec())
    }
}

/// Everything that turns an input `x` into region tables.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialModel {
    unary: ComputationGraph,
    unary_output: NodeId,
    pairwise: Vec<PairwiseModel>,
}

impl PotentialModel {
    /// `unary` must have an input named [`UNARY_INPUT`] of shape `[?, D]` and
    /// `unary_output` of shape `[?, K]`.
    pub fn new(
        unary: ComputationGraph,
        unary_output: NodeId,
        pairwise: Vec<PairwiseModel>,
    ) -> Result<Self> {
        let Some(input) = unary.find(UNARY_INPUT) else {
            return Err(Error::InvalidArgument(format!(
                "unary network has no input named `{UNARY_INPUT}`"
            )));
        };
        if unary.node(input).output_shape.0.len() != 2 {
            return Err(Error::ShapeMismatch {
                node: UNARY_INPUT.into(),
                detail: "unary input must be a batch of rows".into(),
            });
        }
        if unary_output >= unary.len() {
            return Err(Error::InvalidArgument("unary output node does not exist".into()));
        }
        for (i, p) in pairwise.iter().enumerate() {
            if p.class != i {
                return Err(Error::InvalidArgument(format!(
                    "pairwise models must be ordered by class; slot {i} holds class {}",
                    p.class
                )));
            }
        }
        Ok(Self {
            unary,
            unary_output,
            pairwise,
        })
    }

    /// A `D → H₁ → … → K` ReLU perceptron (log-linear when `hidden` is empty).
    pub fn mlp_unary(input_dim: usize, hidden: &[usize], classes: usize) -> Result<(ComputationGraph, NodeId)> {
        let mut g = ComputationGraph::new();
        let mut last = g.input(UNARY_INPUT, ShapeSpec::rows(input_dim))?;
        let mut width = input_dim;
        for (l, &h) in hidden.iter().enumerate() {
            let w = g.parameter(&format!("unary.w{}", l + 1), &format!("unary.W{}", l + 1), &[h, width])?;
            let b = g.parameter(&format!("unary.b{}", l + 1), &format!("unary.b{}", l + 1), &[h])?;
            let a = g.affine(&format!("unary.a{}", l + 1), last, w, b)?;
            last = g.relu(&format!("unary.h{}", l + 1), a)?;
            width = h;
        }
        let l = hidden.len() + 1;
        let w = g.parameter(&format!("unary.w{l}"), &format!("unary.W{l}"), &[classes, width])?;
        let b = g.parameter(&format!("unary.b{l}"), &format!("unary.b{l}"), &[classes])?;
        let out = g.affine("unary.out", last, w, b)?;
        Ok((g, out))
    }

    pub fn unary_graph(&self) -> &ComputationGraph {
        &self.unary
    }

    pub fn unary_output(&self) -> NodeId {
        self.unary_output
    }

    pub fn pairwise(&self) -> &[PairwiseModel] {
        &self.pairwise
    }

    pub fn input_dim(&self) -> usize {
        let id = self.unary.find(UNARY_INPUT).expect("checked in new");
        self.unary.node(id).output_shape.last().unwrap_or(0)
    }

    pub fn unary_param_names(&self) -> Vec<String> {
        self.unary.parameters().into_iter().map(|(n, _)| n).collect()
    }

    pub fn pairwise_param_names(&self) -> Vec<String> {
        self.pairwise.iter().flat_map(|p| p.parameter_names()).collect()
    }

    /// Seeded initialization: Glorot-uniform matrices, zero vectors.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ParameterStore> {
        let mut store = ParameterStore::new();
        let graphs = std::iter::once(&self.unary).chain(self.pairwise.iter().map(|p| &p.graph));
        for g in graphs {
            for (name, dims) in g.parameters() {
                let init = if dims.len() >= 2 { ParamInit::Glorot } else { ParamInit::Zeros };
                store.init(name, dims, init, rng)?;
            }
        }
        Ok(store)
    }

    /// Checks that tables produced by this model fit `graph`.
    pub fn check_compatible(&self, graph: &RegionGraph) -> Result<()> {
        let k = self.unary.node(self.unary_output).output_shape.last();
        for r in graph.regions() {
            match r.binding {
                PotentialBinding::Unary { variable } => {
                    if r.scope != [variable] {
                        return Err(Error::InvalidArgument(format!(
                            "region {} binds unary {variable} but has scope {:?}",
                            r.id, r.scope
                        )));
                    }
                    let card = graph.space().cardinality(variable);
                    if k != Some(card) {
                        return Err(Error::ShapeMismatch {
                            node: self.unary.node(self.unary_output).name.clone(),
                            detail: format!("unary head width {k:?} vs |Y_{variable}| = {card}"),
                        });
                    }
                }
                PotentialBinding::Pairwise { class } => {
                    let p = self.pairwise.get(class).ok_or_else(|| {
                        Error::InvalidArgument(format!("region {} uses missing pairwise class {class}", r.id))
                    })?;
                    let (a, b) = match r.scope.as_slice() {
                        [a, b] => (*a, *b),
                        _ => {
                            return Err(Error::InvalidArgument(format!(
                                "pairwise region {} must span two variables",
                                r.id
                            )))
                        }
                    };
                    let (ka, kb) = (graph.space().cardinality(a), graph.space().cardinality(b));
                    if (p.rows, p.cols) != (ka, kb) {
                        return Err(Error::ShapeMismatch {
                            node: PairwiseModel::prefix(class),
                            detail: format!("table {}×{} vs region {ka}×{kb}", p.rows, p.cols),
                        });
                    }
                }
                PotentialBinding::Zero => {}
            }
        }
        Ok(())
    }
}

/// Dense per-region tables for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialTables {
    tables: Vec<Vec<f64>>,
}

impl PotentialTables {
    pub fn zeros(graph: &RegionGraph) -> Self {
        Self {
            tables: (0..graph.len()).map(|r| vec![0.0; graph.table_size(r)]).collect(),
        }
    }

    /// Wraps explicit tables, checking sizes against `graph`.
    pub fn from_tables(graph: &RegionGraph, tables: Vec<Vec<f64>>) -> Result<Self> {
        if tables.len() != graph.len() {
            return Err(Error::InvalidArgument(format!(
                "{} tables for {} regions",
                tables.len(),
                graph.len()
            )));
        }
        for (r, t) in tables.iter().enumerate() {
            if t.len() != graph.table_size(r) {
                return Err(Error::InvalidArgument(format!(
                    "region {r} table has {} entries, expected {}",
                    t.len(),
                    graph.table_size(r)
                )));
            }
        }
        Ok(Self { tables })
    }

    pub fn region(&self, r: RegionId) -> &[f64] {
        &self.tables[r]
    }

    pub fn region_mut(&mut self, r: RegionId) -> &mut [f64] {
        &mut self.tables[r]
    }

    pub fn tables(&self) -> &[Vec<f64>] {
        &self.tables
    }

    pub fn is_finite(&self) -> bool {
        self.tables.iter().flatten().all(|v| v.is_finite())
    }

    /// `alpha · self + beta · other`
    pub fn combine(&self, alpha: f64, other: &PotentialTables, beta: f64) -> PotentialTables {
        PotentialTables {
            tables: self
                .tables
                .iter()
                .zip(&other.tables)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| alpha * x + beta * y).collect())
                .collect(),
        }
    }
}

/// `F(x, y; w) = Σ_r f_r(x, y_r; w)`.
pub fn score_configuration(graph: &RegionGraph, tables: &PotentialTables, y: &[usize]) -> Result<f64> {
    graph.space().check_assignment(y)?;
    Ok((0..graph.len())
        .map(|r| tables.region(r)[graph.local_index(r, y)])
        .sum())
}

/// Adds `weight · [ŷ_i ≠ y_i]` to every unary table; pairwise tables are
/// untouched since the Hamming loss decomposes over variables.
pub fn loss_augment(
    graph: &RegionGraph,
    tables: &PotentialTables,
    truth: &[usize],
    weight: f64,
) -> PotentialTables {
    let mut out = tables.clone();
    if weight == 0.0 {
        return out;
    }
    for r in graph.regions() {
        if let [v] = r.scope.as_slice() {
            for (label, entry) in out.tables[r.id].iter_mut().enumerate() {
                if label != truth[*v] {
                    *entry += weight;
                }
            }
        }
    }
    out
}

/// Intermediate values kept from [`evaluate_batch`] for the backward pass.
#[derive(Debug, Clone)]
pub struct PotentialCache {
    unary: Activations,
    pairwise: Vec<Activations>,
    samples: usize,
    rows_per_sample: usize,
}

/// Tables for several samples at once; the unary network runs on all
/// character slots stacked into one batch.
pub fn evaluate_batch(
    graph: &RegionGraph,
    model: &PotentialModel,
    params: &ParameterStore,
    inputs: &[&TensorValue],
) -> Result<(Vec<PotentialTables>, PotentialCache)> {
    let n = graph.space().num_variables();
    let dim = model.input_dim();
    let mut stacked = Vec::with_capacity(inputs.len() * n * dim);
    for x in inputs {
        if x.shape() != [n, dim] {
            return Err(Error::ShapeMismatch {
                node: UNARY_INPUT.into(),
                detail: format!("sample input {:?}, expected [{n}, {dim}]", x.shape()),
            });
        }
        stacked.extend_from_slice(x.data());
    }
    let bound = HashMap::from([(
        UNARY_INPUT.to_string(),
        TensorValue::new(vec![(inputs.len() * n).max(1), dim], {
            if stacked.is_empty() {
                vec![0.0; dim]
            } else {
                stacked
            }
        })?,
    )]);
    let unary = model.unary.forward(params, &bound)?;
    let pairwise = model
        .pairwise
        .iter()
        .map(|p| p.forward(params))
        .collect::<Result<Vec<_>>>()?;

    let scores = unary.get(model.unary_output);
    let k = scores.last_dim();
    let mut out = Vec::with_capacity(inputs.len());
    for s in 0..inputs.len() {
        let mut t = PotentialTables::zeros(graph);
        for r in graph.regions() {
            match r.binding {
                PotentialBinding::Unary { variable } => {
                    let row = s * n + variable;
                    let src = &scores.data()[row * k..(row + 1) * k];
                    if src.len() != t.tables[r.id].len() {
                        return Err(Error::ShapeMismatch {
                            node: model.unary.node(model.unary_output).name.clone(),
                            detail: format!("{} scores for region {} of size {}", k, r.id, t.tables[r.id].len()),
                        });
                    }
                    t.tables[r.id].copy_from_slice(src);
                }
                PotentialBinding::Pairwise { class } => {
                    let p = model.pairwise.get(class).ok_or_else(|| {
                        Error::InvalidArgument(format!("missing pairwise class {class}"))
                    })?;
                    let src = pairwise[class].get(p.output).data();
                    if src.len() != t.tables[r.id].len() {
                        return Err(Error::ShapeMismatch {
                            node: PairwiseModel::prefix(class),
                            detail: format!("{} entries for region {} of size {}", src.len(), r.id, t.tables[r.id].len()),
                        });
                    }
                    t.tables[r.id].copy_from_slice(src);
                }
                PotentialBinding::Zero => {}
            }
        }
        out.push(t);
    }
    let cache = PotentialCache {
        unary,
        pairwise,
        samples: inputs.len(),
        rows_per_sample: n,
    };
    Ok((out, cache))
}

/// Tables for a single sample `x` of shape `[N, D]`.
pub fn evaluate_potentials(
    graph: &RegionGraph,
    model: &PotentialModel,
    params: &ParameterStore,
    x: &TensorValue,
) -> Result<PotentialTables> {
    let (mut t, _) = evaluate_batch(graph, model, params, &[x])?;
    Ok(t.pop().expect("one sample"))
}

/// Backpropagates per-region table gradients `∂L/∂f_r(ŷ_r)` of every sample
/// in the batch into `grads`.
pub fn backward_batch(
    graph: &RegionGraph,
    model: &PotentialModel,
    cache: &PotentialCache,
    table_grads: &[PotentialTables],
    grads: &mut GradientStore,
) -> Result<()> {
    if table_grads.len() != cache.samples {
        return Err(Error::InvalidArgument(format!(
            "{} gradient sets for a batch of {}",
            table_grads.len(),
            cache.samples
        )));
    }
    let scores = cache.unary.get(model.unary_output);
    let k = scores.last_dim();
    let mut unary_grad = vec![0.0; scores.len()];
    let mut pair_grads: Vec<Vec<f64>> = model
        .pairwise
        .iter()
        .map(|p| vec![0.0; p.rows * p.cols])
        .collect();
    let mut pair_used = vec![false; model.pairwise.len()];
    for (s, tg) in table_grads.iter().enumerate() {
        for r in graph.regions() {
            match r.binding {
                PotentialBinding::Unary { variable } => {
                    let row = s * cache.rows_per_sample + variable;
                    for (d, g) in unary_grad[row * k..(row + 1) * k].iter_mut().zip(&tg.tables[r.id]) {
                        *d += g;
                    }
                }
                PotentialBinding::Pairwise { class } => {
                    pair_used[class] = true;
                    for (d, g) in pair_grads[class].iter_mut().zip(&tg.tables[r.id]) {
                        *d += g;
                    }
                }
                PotentialBinding::Zero => {}
            }
        }
    }
    if cache.samples > 0 {
        let dy = TensorValue::new(scores.shape().to_vec(), unary_grad)?;
        model
            .unary
            .backward_into(&cache.unary, &[(model.unary_output, dy)], grads)?;
    }
    for ((p, act), (g, used)) in model
        .pairwise
        .iter()
        .zip(&cache.pairwise)
        .zip(pair_grads.into_iter().zip(pair_used))
    {
        if !used {
            continue;
        }
        let dy = TensorValue::new(act.get(p.output).shape().to_vec(), g)?;
        p.graph.backward_into(act, &[(p.output, dy)], grads)?;
    }
    Ok(())
}
