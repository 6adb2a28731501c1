//! A small reverse-mode computation graph over dense `f64` tensors.
//!
//! Nodes are appended in topological order: a node may only consume nodes
//! created before it, so every graph is a DAG by construction. Tensors of rank
//! two are treated as a batch of row vectors by the row-wise primitives.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::params::{GradientStore, ParameterStore};
use crate::tensor::TensorValue;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Input { name: String },
    Parameter { name: String },
    /// `y = x Wᵀ + b` with inputs `[x, W, b]`, `W: [out, in]`, `b: [out]`.
    Affine,
    Relu,
    Sigmoid,
    /// Soft-max over the last axis.
    Softmax,
    /// Concatenation along the last axis.
    Concat,
    /// Row selection `table[idx]` with inputs `[table, idx]`; `idx` holds
    /// integer-valued entries.
    Lookup,
}

impl NodeKind {
    pub fn label(&self) -> &'static str {
        match self {
            NodeKind::Input { .. } => "input",
            NodeKind::Parameter { .. } => "param",
            NodeKind::Affine => "affine",
            NodeKind::Relu => "relu",
            NodeKind::Sigmoid => "sigmoid",
            NodeKind::Softmax => "softmax",
            NodeKind::Concat => "concat",
            NodeKind::Lookup => "lookup",
        }
    }
}

/// Shape with optional wildcard axes (`None` matches any size).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeSpec(pub Vec<Option<usize>>);

impl ShapeSpec {
    pub fn fixed(dims: &[usize]) -> Self {
        Self(dims.iter().map(|&d| Some(d)).collect())
    }

    /// A batch of row vectors of width `dim`.
    pub fn rows(dim: usize) -> Self {
        Self(vec![None, Some(dim)])
    }

    pub fn matches(&self, shape: &[usize]) -> bool {
        self.0.len() == shape.len()
            && self
                .0
                .iter()
                .zip(shape)
                .all(|(s, &d)| s.map_or(true, |s| s == d))
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().copied().flatten()
    }
}

impl fmt::Display for ShapeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            match d {
                Some(d) => write!(f, "{d}")?,
                None => write!(f, "?")?,
            }
        }
        write!(f, "]")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphNode {
    pub id: NodeId,
    pub name: String,
    pub kind: NodeKind,
    pub inputs: Vec<NodeId>,
    pub output_shape: ShapeSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ComputationGraph {
    nodes: Vec<GraphNode>,
    by_name: HashMap<String, NodeId>,
}

impl ComputationGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &GraphNode {
        &self.nodes[id]
    }

    pub fn find(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Names and declared shapes of all parameter nodes; shared names appear once.
    pub fn parameters(&self) -> Vec<(String, Vec<usize>)> {
        let mut out: Vec<(String, Vec<usize>)> = Vec::new();
        for n in &self.nodes {
            if let NodeKind::Parameter { name } = &n.kind {
                if !out.iter().any(|(m, _)| m == name) {
                    let dims = n.output_shape.0.iter().map(|d| d.unwrap_or(0)).collect();
                    out.push((name.clone(), dims));
                }
            }
        }
        out
    }

    pub fn input(&mut self, name: &str, shape: ShapeSpec) -> Result<NodeId> {
        self.push(
            name,
            NodeKind::Input {
                name: name.to_string(),
            },
            vec![],
            shape,
        )
    }

    /// A parameter slot. Several slots may name the same stored tensor, in
    /// which case their declared shapes must agree.
    pub fn parameter(&mut self, node_name: &str, param: &str, dims: &[usize]) -> Result<NodeId> {
        for n in &self.nodes {
            if let NodeKind::Parameter { name } = &n.kind {
                if name == param && n.output_shape != ShapeSpec::fixed(dims) {
                    return Err(Error::ShapeMismatch {
                        node: node_name.to_string(),
                        detail: format!(
                            "shared parameter `{param}` declared as {} and {:?}",
                            n.output_shape, dims
                        ),
                    });
                }
            }
        }
        self.push(
            node_name,
            NodeKind::Parameter {
                name: param.to_string(),
            },
            vec![],
            ShapeSpec::fixed(dims),
        )
    }

    pub fn affine(&mut self, name: &str, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        self.add(name, NodeKind::Affine, vec![x, w, b])
    }

    pub fn relu(&mut self, name: &str, x: NodeId) -> Result<NodeId> {
        self.add(name, NodeKind::Relu, vec![x])
    }

    pub fn sigmoid(&mut self, name: &str, x: NodeId) -> Result<NodeId> {
        self.add(name, NodeKind::Sigmoid, vec![x])
    }

    pub fn softmax(&mut self, name: &str, x: NodeId) -> Result<NodeId> {
        self.add(name, NodeKind::Softmax, vec![x])
    }

    pub fn concat(&mut self, name: &str, parts: Vec<NodeId>) -> Result<NodeId> {
        self.add(name, NodeKind::Concat, parts)
    }

    pub fn lookup(&mut self, name: &str, table: NodeId, idx: NodeId) -> Result<NodeId> {
        self.add(name, NodeKind::Lookup, vec![table, idx])
    }

    /// Appends a non-leaf node, inferring its output shape.
    pub fn add(&mut self, name: &str, kind: NodeKind, inputs: Vec<NodeId>) -> Result<NodeId> {
        if let Some(&bad) = inputs.iter().find(|&&i| i >= self.nodes.len()) {
            return Err(Error::InvalidArgument(format!(
                "node `{name}` refers to unknown node {bad}"
            )));
        }
        let specs: Vec<&ShapeSpec> = inputs.iter().map(|&i| &self.nodes[i].output_shape).collect();
        let shape = infer_shape(name, &kind, &specs)?;
        self.push(name, kind, inputs, shape)
    }

    fn push(
        &mut self,
        name: &str,
        kind: NodeKind,
        inputs: Vec<NodeId>,
        output_shape: ShapeSpec,
    ) -> Result<NodeId> {
        if self.by_name.contains_key(name) {
            return Err(Error::InvalidArgument(format!("duplicate node name `{name}`")));
        }
        let id = self.nodes.len();
        self.nodes.push(GraphNode {
            id,
            name: name.to_string(),
            kind,
            inputs,
            output_shape,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    /// Evaluates every node.
    pub fn forward(
        &self,
        params: &ParameterStore,
        inputs: &HashMap<String, TensorValue>,
    ) -> Result<Activations> {
        let mut values: Vec<TensorValue> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let args: Vec<&TensorValue> = node.inputs.iter().map(|&i| &values[i]).collect();
            let out = match &node.kind {
                NodeKind::Input { name } => {
                    let v = inputs
                        .get(name)
                        .ok_or_else(|| Error::UnboundInput(name.clone()))?;
                    v.clone()
                }
                NodeKind::Parameter { name } => params.require(name)?.clone(),
                kind => eval_op(&node.name, kind, &args)?,
            };
            if !node.output_shape.matches(out.shape()) {
                return Err(Error::ShapeMismatch {
                    node: node.name.clone(),
                    detail: format!(
                        "expected {}, got {:?}",
                        node.output_shape,
                        out.shape()
                    ),
                });
            }
            values.push(out);
        }
        Ok(Activations { values })
    }

    /// Accumulates `∂(Σ ⟨output_grad, output⟩)/∂w` into `grads`.
    ///
    /// Gradients of parameters referenced from several slots are summed.
    pub fn backward_into(
        &self,
        activations: &Activations,
        output_grads: &[(NodeId, TensorValue)],
        grads: &mut GradientStore,
    ) -> Result<()> {
        if activations.values.len() != self.nodes.len() {
            let missing = activations.values.len().min(self.nodes.len());
            return Err(Error::MissingActivation(
                self.nodes
                    .get(missing)
                    .map(|n| n.name.clone())
                    .unwrap_or_else(|| format!("#{missing}")),
            ));
        }
        let needs = self.needs_grad();
        let mut adj: Vec<Option<TensorValue>> = vec![None; self.nodes.len()];
        for (id, g) in output_grads {
            let node = self.nodes.get(*id).ok_or_else(|| {
                Error::InvalidArgument(format!("output gradient for unknown node {id}"))
            })?;
            if g.shape() != activations.values[*id].shape() {
                return Err(Error::ShapeMismatch {
                    node: node.name.clone(),
                    detail: format!(
                        "output gradient {:?} vs activation {:?}",
                        g.shape(),
                        activations.values[*id].shape()
                    ),
                });
            }
            accumulate(&mut adj[*id], g.clone());
        }
        for node in self.nodes.iter().rev() {
            let Some(dy) = adj[node.id].take() else {
                continue;
            };
            match &node.kind {
                NodeKind::Input { .. } => {}
                NodeKind::Parameter { name } => {
                    let pos = grads
                        .names()
                        .iter()
                        .position(|n| n == name)
                        .ok_or_else(|| Error::UnknownParameter(name.clone()))?;
                    let slot = grads.at_mut(pos);
                    if slot.shape() != dy.shape() {
                        return Err(Error::ShapeMismatch {
                            node: node.name.clone(),
                            detail: "gradient store is not congruent with the graph".into(),
                        });
                    }
                    slot.axpy(1.0, &dy);
                }
                kind => {
                    let args: Vec<&TensorValue> =
                        node.inputs.iter().map(|&i| &activations.values[i]).collect();
                    let want: Vec<bool> = node.inputs.iter().map(|&i| needs[i]).collect();
                    let out = &activations.values[node.id];
                    let input_grads = grad_op(kind, &args, out, &dy, &want);
                    for (&i, g) in node.inputs.iter().zip(input_grads) {
                        if let Some(g) = g {
                            accumulate(&mut adj[i], g);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn backward(
        &self,
        params: &ParameterStore,
        activations: &Activations,
        output_grads: &[(NodeId, TensorValue)],
    ) -> Result<GradientStore> {
        let mut grads = params.zeros_like();
        self.backward_into(activations, output_grads, &mut grads)?;
        Ok(grads)
    }

    /// Whether a node lies on a path from some parameter.
    fn needs_grad(&self) -> Vec<bool> {
        let mut needs = vec![false; self.nodes.len()];
        for n in &self.nodes {
            needs[n.id] = match n.kind {
                NodeKind::Parameter { .. } => true,
                NodeKind::Input { .. } => false,
                _ => n.inputs.iter().any(|&i| needs[i]),
            };
        }
        needs
    }
}

/// Per-node outputs of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    values: Vec<TensorValue>,
}

impl Activations {
    pub fn get(&self, id: NodeId) -> &TensorValue {
        &self.values[id]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn accumulate(slot: &mut Option<TensorValue>, g: TensorValue) {
    match slot {
        Some(acc) => acc.axpy(1.0, &g),
        None => *slot = Some(g),
    }
}

fn mismatch(node: &str, detail: String) -> Error {
    Error::ShapeMismatch {
        node: node.to_string(),
        detail,
    }
}

fn infer_shape(name: &str, kind: &NodeKind, specs: &[&ShapeSpec]) -> Result<ShapeSpec> {
    let arity = |n: usize| -> Result<()> {
        if specs.len() != n {
            Err(mismatch(
                name,
                format!("{} takes {n} inputs, got {}", kind.label(), specs.len()),
            ))
        } else {
            Ok(())
        }
    };
    match kind {
        NodeKind::Input { .. } | NodeKind::Parameter { .. } => Err(Error::InvalidArgument(
            format!("node `{name}`: leaves are created with input()/parameter()"),
        )),
        NodeKind::Affine => {
            arity(3)?;
            let (x, w, b) = (specs[0], specs[1], specs[2]);
            let (out, inp) = match w.0.as_slice() {
                [Some(o), Some(i)] => (*o, *i),
                _ => return Err(mismatch(name, format!("weight must be a fixed matrix, got {w}"))),
            };
            if !b.matches(&[out]) {
                return Err(mismatch(name, format!("bias {b} does not match weight rows {out}")));
            }
            if x.0.is_empty() || x.0.len() > 2 || x.last().is_some_and(|d| d != inp) {
                return Err(mismatch(name, format!("input {x} incompatible with weight [{out}, {inp}]")));
            }
            let mut s = x.0.clone();
            *s.last_mut().unwrap() = Some(out);
            Ok(ShapeSpec(s))
        }
        NodeKind::Relu | NodeKind::Sigmoid | NodeKind::Softmax => {
            arity(1)?;
            Ok(specs[0].clone())
        }
        NodeKind::Concat => {
            if specs.is_empty() {
                return Err(mismatch(name, "concat needs at least one input".into()));
            }
            let lead = &specs[0].0[..specs[0].0.len() - 1];
            let mut width = Some(0usize);
            for s in specs {
                if s.0.is_empty() || &s.0[..s.0.len() - 1] != lead {
                    return Err(mismatch(name, format!("concat inputs disagree on leading axes: {s}")));
                }
                width = match (width, s.last()) {
                    (Some(a), Some(b)) => Some(a + b),
                    _ => None,
                };
            }
            let mut s = lead.to_vec();
            s.push(width);
            Ok(ShapeSpec(s))
        }
        NodeKind::Lookup => {
            arity(2)?;
            let (table, idx) = (specs[0], specs[1]);
            let cols = match table.0.as_slice() {
                [Some(_), Some(c)] => *c,
                _ => return Err(mismatch(name, format!("lookup table must be a fixed matrix, got {table}"))),
            };
            let mut s = idx.0.clone();
            s.push(Some(cols));
            Ok(ShapeSpec(s))
        }
    }
}

/// `c = alpha · op(a) · op(b) + beta · c` over explicit strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    assert!(m == 0 || k == 0 || (m - 1) * rsa + (k - 1) * csa < a.len());
    assert!(k == 0 || n == 0 || (k - 1) * rsb + (n - 1) * csb < b.len());
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above bound every index dgemm touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn eval_op(name: &str, kind: &NodeKind, args: &[&TensorValue]) -> Result<TensorValue> {
    match kind {
        NodeKind::Affine => {
            let (x, w, b) = (args[0], args[1], args[2]);
            let (out, inp) = (w.shape()[0], w.shape()[1]);
            if x.last_dim() != inp {
                return Err(mismatch(name, format!("input width {} vs weight {inp}", x.last_dim())));
            }
            let rows = x.rows();
            let mut y = Vec::with_capacity(rows * out);
            for _ in 0..rows {
                y.extend_from_slice(b.data());
            }
            gemm(rows, inp, out, x.data(), (inp, 1), w.data(), (1, inp), 1.0, &mut y);
            let mut shape = x.shape().to_vec();
            *shape.last_mut().unwrap() = out;
            TensorValue::new(shape, y)
        }
        NodeKind::Relu => Ok(map(args[0], |v| if v > 0.0 { v } else { 0.0 })),
        NodeKind::Sigmoid => Ok(map(args[0], sigmoid)),
        NodeKind::Softmax => {
            let x = args[0];
            let d = x.last_dim();
            let mut y = x.data().to_vec();
            for row in y.chunks_mut(d) {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut s = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    s += *v;
                }
                row.iter_mut().for_each(|v| *v /= s);
            }
            TensorValue::new(x.shape().to_vec(), y)
        }
        NodeKind::Concat => {
            let rows = args[0].rows();
            if args.iter().any(|a| a.rows() != rows) {
                return Err(mismatch(name, "concat inputs have different row counts".into()));
            }
            let width: usize = args.iter().map(|a| a.last_dim()).sum();
            let mut y = Vec::with_capacity(rows * width);
            for r in 0..rows {
                for a in args {
                    let d = a.last_dim();
                    y.extend_from_slice(&a.data()[r * d..(r + 1) * d]);
                }
            }
            let mut shape = args[0].shape().to_vec();
            *shape.last_mut().unwrap() = width;
            TensorValue::new(shape, y)
        }
        NodeKind::Lookup => {
            let (table, idx) = (args[0], args[1]);
            let (rows, cols) = (table.shape()[0], table.shape()[1]);
            let mut y = Vec::with_capacity(idx.len() * cols);
            for &v in idx.data() {
                let r = lookup_index(name, v, rows)?;
                y.extend_from_slice(&table.data()[r * cols..(r + 1) * cols]);
            }
            let mut shape = idx.shape().to_vec();
            shape.push(cols);
            TensorValue::new(shape, y)
        }
        NodeKind::Input { .. } | NodeKind::Parameter { .. } => unreachable!(),
    }
}

fn lookup_index(name: &str, v: f64, rows: usize) -> Result<usize> {
    if v < 0.0 || v.fract() != 0.0 || v as usize >= rows {
        return Err(mismatch(name, format!("lookup index {v} outside table of {rows} rows")));
    }
    Ok(v as usize)
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn map(x: &TensorValue, f: impl Fn(f64) -> f64) -> TensorValue {
    let data = x.data().iter().map(|&v| f(v)).collect();
    TensorValue::new(x.shape().to_vec(), data).expect("same shape")
}

fn grad_op(
    kind: &NodeKind,
    args: &[&TensorValue],
    out: &TensorValue,
    dy: &TensorValue,
    want: &[bool],
) -> Vec<Option<TensorValue>> {
    let like = |t: &TensorValue, data: Vec<f64>| {
        TensorValue::new(t.shape().to_vec(), data).expect("same shape")
    };
    match kind {
        NodeKind::Affine => {
            let (x, w) = (args[0], args[1]);
            let (nout, nin) = (w.shape()[0], w.shape()[1]);
            let rows = x.rows();
            let dx = want[0].then(|| {
                let mut d = vec![0.0; rows * nin];
                gemm(rows, nout, nin, dy.data(), (nout, 1), w.data(), (nin, 1), 0.0, &mut d);
                like(x, d)
            });
            let dw = want[1].then(|| {
                let mut d = vec![0.0; nout * nin];
                gemm(nout, rows, nin, dy.data(), (1, nout), x.data(), (nin, 1), 0.0, &mut d);
                like(w, d)
            });
            let db = want[2].then(|| {
                let mut d = vec![0.0; nout];
                for row in dy.data().chunks(nout) {
                    for (a, b) in d.iter_mut().zip(row) {
                        *a += b;
                    }
                }
                TensorValue::vector(d)
            });
            vec![dx, dw, db]
        }
        NodeKind::Relu => {
            let x = args[0];
            let d = x
                .data()
                .iter()
                .zip(dy.data())
                .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
                .collect();
            vec![want[0].then(|| like(x, d))]
        }
        NodeKind::Sigmoid => {
            let d = out
                .data()
                .iter()
                .zip(dy.data())
                .map(|(&y, &g)| g * y * (1.0 - y))
                .collect();
            vec![want[0].then(|| like(out, d))]
        }
        NodeKind::Softmax => {
            let dim = out.last_dim();
            let mut d = vec![0.0; out.len()];
            for ((dr, yr), gr) in d
                .chunks_mut(dim)
                .zip(out.data().chunks(dim))
                .zip(dy.data().chunks(dim))
            {
                let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                for ((o, &y), &g) in dr.iter_mut().zip(yr).zip(gr) {
                    *o = y * (g - dot);
                }
            }
            vec![want[0].then(|| like(out, d))]
        }
        NodeKind::Concat => {
            let rows = out.rows();
            let width = out.last_dim();
            let mut offset = 0;
            args.iter()
                .zip(want)
                .map(|(a, &w)| {
                    let d = a.last_dim();
                    let part = w.then(|| {
                        let mut g = Vec::with_capacity(a.len());
                        for r in 0..rows {
                            let start = r * width + offset;
                            g.extend_from_slice(&dy.data()[start..start + d]);
                        }
                        like(a, g)
                    });
                    offset += d;
                    part
                })
                .collect()
        }
        NodeKind::Lookup => {
            let (table, idx) = (args[0], args[1]);
            let cols = table.shape()[1];
            let dt = want[0].then(|| {
                let mut g = vec![0.0; table.len()];
                for (k, &v) in idx.data().iter().enumerate() {
                    let r = v as usize;
                    for c in 0..cols {
                        g[r * cols + c] += dy.data()[k * cols + c];
                    }
                }
                like(table, g)
            });
            vec![dt, None]
        }
        NodeKind::Input { .. } | NodeKind::Parameter { .. } => vec![],
    }
}
