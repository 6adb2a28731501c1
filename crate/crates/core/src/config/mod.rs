//! INI-style model specification: `[network]`, `[graph]`, `[train]` and
//! `[data]` sections.
//!
//! ```text
//! [network]
//! input = 784          # pixels per character slot
//! hidden = 128         # comma-separated hidden widths; empty for log-linear
//!
//! [graph]
//! variables = 5
//! cardinality = 26
//! order = 1
//! pairwise = linear
//! ```

mod parse;

pub use parse::parse;

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::data::{Dataset, DatasetSpec};
use crate::error::{ConfigError, Error, Result};
use crate::graph::{ComputationGraph, NodeId, ShapeSpec};
use crate::learning::TrainConfig;
use crate::potentials::{PairwiseKind, PairwiseModel, PotentialModel, UNARY_INPUT};
use crate::region::{build_chain_with, CountingNumbers, PotentialBinding, Region, RegionGraph, VariableSpace};

/// One `node = ...` declaration of an explicit network.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeDecl {
    Input { name: String, dim: usize },
    Param { name: String, dims: Vec<usize> },
    Affine { name: String, x: String, w: String, b: String },
    Relu { name: String, x: String },
    Sigmoid { name: String, x: String },
    Softmax { name: String, x: String },
    Concat { name: String, xs: Vec<String> },
    Lookup { name: String, table: String, index: String },
}

impl NodeDecl {
    pub fn name(&self) -> &str {
        match self {
            NodeDecl::Input { name, .. }
            | NodeDecl::Param { name, .. }
            | NodeDecl::Affine { name, .. }
            | NodeDecl::Relu { name, .. }
            | NodeDecl::Sigmoid { name, .. }
            | NodeDecl::Softmax { name, .. }
            | NodeDecl::Concat { name, .. }
            | NodeDecl::Lookup { name, .. } => name,
        }
    }

    fn to_line(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ");
        match self {
            NodeDecl::Input { name, dim } => format!("input {name} {dim}"),
            NodeDecl::Param { name, dims } => format!("param {name} {}", join(dims)),
            NodeDecl::Affine { name, x, w, b } => format!("affine {name} {x} {w} {b}"),
            NodeDecl::Relu { name, x } => format!("relu {name} {x}"),
            NodeDecl::Sigmoid { name, x } => format!("sigmoid {name} {x}"),
            NodeDecl::Softmax { name, x } => format!("softmax {name} {x}"),
            NodeDecl::Concat { name, xs } => format!("concat {name} {}", xs.join(" ")),
            NodeDecl::Lookup { name, table, index } => format!("lookup {name} {table} {index}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkSpec {
    /// `input → hidden… → cardinality` ReLU perceptron.
    Mlp { input: usize, hidden: Vec<usize> },
    Nodes { nodes: Vec<NodeDecl>, output: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairDecl {
    pub a: usize,
    pub b: usize,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    Chain { order: usize },
    /// Explicit pairwise regions; every variable also gets a unary region.
    Pairs(Vec<PairDecl>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    pub variables: usize,
    pub cardinality: usize,
    pub structure: Structure,
    pub counting: CountingNumbers,
    pub pairwise: PairwiseKind,
}

impl GraphSpec {
    pub fn num_pairwise_classes(&self) -> usize {
        match &self.structure {
            Structure::Chain { order } => *order,
            Structure::Pairs(p) => p.iter().map(|d| d.class + 1).max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSection {
    /// Directory holding generated splits, if any.
    pub path: Option<String>,
    pub spec: DatasetSpec,
}

/// Source line and column of each key, for errors found after parsing.
#[derive(Debug, Clone, Default)]
pub struct Spans {
    entries: Vec<(String, usize, usize)>,
}

impl Spans {
    fn push(&mut self, key: String, line: usize, column: usize) {
        self.entries.push((key, line, column));
    }

    /// Location of `section.key` (or `section.node#i`), falling back to 1:1.
    pub fn locate(&self, key: &str) -> (usize, usize) {
        self.entries
            .iter()
            .find(|(k, _, _)| k == key)
            .map_or((1, 1), |&(_, l, c)| (l, c))
    }
}

impl PartialEq for Spans {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpecDoc {
    pub network: NetworkSpec,
    pub graph: GraphSpec,
    pub train: TrainConfig,
    pub data: DataSection,
    pub spans: Spans,
}

/// Everything a config describes, validated.
#[derive(Debug)]
pub struct Instance {
    pub graph: RegionGraph,
    pub model: PotentialModel,
    pub train: TrainConfig,
    pub data: DataSection,
}

impl Instance {
    /// Errors with [`Error::Incompatible`] unless `data` fits this model's
    /// word length, input width and label range.
    pub fn check_dataset(&self, data: &Dataset) -> Result<()> {
        let n = self.graph.space().num_variables();
        if data.word_len != n {
            return Err(Error::Incompatible(format!(
                "data has words of length {}, model has {n} variables",
                data.word_len
            )));
        }
        let pixels = data.height * data.width;
        if pixels != self.model.input_dim() {
            return Err(Error::Incompatible(format!(
                "data has {pixels} pixels per character, model expects {}",
                self.model.input_dim()
            )));
        }
        let k = self.graph.space().cardinality(0);
        if let Some(l) = data.samples.iter().flat_map(|s| &s.labels).find(|&&l| l as usize > k) {
            return Err(Error::Incompatible(format!("label {l} exceeds the model's {k} classes")));
        }
        Ok(())
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

impl ModelSpecDoc {
    fn network_text(&self) -> String {
        let mut s = String::from("[network]\n");
        match &self.network {
            NetworkSpec::Mlp { input, hidden } => {
                let h: Vec<String> = hidden.iter().map(|h| h.to_string()).collect();
                let _ = writeln!(s, "input = {input}");
                let _ = writeln!(s, "hidden = {}", h.join(", "));
            }
            NetworkSpec::Nodes { nodes, output } => {
                for n in nodes {
                    let _ = writeln!(s, "node = {}", n.to_line());
                }
                let _ = writeln!(s, "output = {output}");
            }
        }
        s
    }

    fn graph_text(&self) -> String {
        let g = &self.graph;
        let mut s = String::from("[graph]\n");
        let _ = writeln!(s, "variables = {}", g.variables);
        let _ = writeln!(s, "cardinality = {}", g.cardinality);
        match &g.structure {
            Structure::Chain { order } => {
                let _ = writeln!(s, "order = {order}");
            }
            Structure::Pairs(pairs) => {
                for p in pairs {
                    let _ = writeln!(s, "region = {} {} class {}", p.a, p.b, p.class);
                }
            }
        }
        let _ = writeln!(s, "counting_unary = {}", fmt_f64(g.counting.unary));
        let _ = writeln!(s, "counting_pairwise = {}", fmt_f64(g.counting.pairwise));
        match g.pairwise {
            PairwiseKind::Linear => s.push_str("pairwise = linear\n"),
            PairwiseKind::MlpTable { hidden } => {
                let _ = writeln!(s, "pairwise = mlp\npairwise_hidden = {hidden}");
            }
        }
        s
    }

    /// Canonical text; `parse(&doc.serialize())` equals `doc`.
    pub fn serialize(&self) -> String {
        let t = &self.train;
        let mut s = self.network_text();
        s.push('\n');
        s.push_str(&self.graph_text());
        s.push_str("\n[train]\n");
        let _ = writeln!(s, "epsilon = {}", fmt_f64(t.epsilon));
        let _ = writeln!(s, "step_size = {}", fmt_f64(t.step_size));
        let _ = writeln!(s, "momentum = {}", fmt_f64(t.momentum));
        let _ = writeln!(s, "batch_size = {}", t.batch_size);
        let _ = writeln!(s, "max_iterations = {}", t.max_iterations);
        let _ = writeln!(s, "message_sweeps_per_update = {}", t.message_sweeps_per_update);
        let _ = writeln!(s, "step_decay = {}", fmt_f64(t.step_decay));
        let _ = writeln!(s, "strategy = {}", t.strategy);
        let _ = writeln!(s, "algorithm = {}", t.algorithm);
        let _ = writeln!(s, "loss_augment_weight = {}", fmt_f64(t.loss_augment_weight));
        let _ = writeln!(s, "seed = {}", t.seed);
        let _ = writeln!(s, "pretrain_iterations = {}", t.pretrain_iterations);
        let _ = writeln!(s, "pretrained_step_size = {}", fmt_f64(t.pretrained_step_size));
        let _ = writeln!(s, "validate_every = {}", t.validate_every);
        let _ = writeln!(s, "eval_sweeps = {}", t.eval_sweeps);

        let d = &self.data.spec;
        s.push_str("\n[data]\n");
        if let Some(p) = &self.data.path {
            let _ = writeln!(s, "path = {p}");
        }
        let _ = writeln!(s, "train = {}", d.train);
        let _ = writeln!(s, "val = {}", d.validation);
        let _ = writeln!(s, "test = {}", d.test);
        let _ = writeln!(s, "rotation = {}", fmt_f64(d.rotation));
        let _ = writeln!(s, "scale_min = {}", fmt_f64(d.scale_min));
        let _ = writeln!(s, "scale_max = {}", fmt_f64(d.scale_max));
        let _ = writeln!(s, "translation = {}", fmt_f64(d.translation));
        let _ = writeln!(s, "noise = {}", fmt_f64(d.noise));
        let _ = writeln!(s, "background = {}", d.background.name());
        let _ = writeln!(s, "seed = {}", d.seed);
        let _ = writeln!(s, "vocabulary = {}", d.vocabulary.join(", "));
        s
    }

    /// First 8 bytes of SHA-256 over the canonical `[network]` and `[graph]`
    /// sections: equal hashes mean interchangeable parameter layouts.
    pub fn structure_hash(&self) -> u64 {
        let mut h = Sha256::new();
        h.update(self.network_text().as_bytes());
        h.update(self.graph_text().as_bytes());
        u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
    }

    fn error_at(&self, key: &str, message: impl Into<String>) -> Error {
        let (line, column) = self.spans.locate(key);
        Error::Config(ConfigError::new(line, column, message))
    }

    pub fn build_graph(&self) -> Result<RegionGraph> {
        let g = &self.graph;
        let space = VariableSpace::uniform(g.variables, g.cardinality)
            .map_err(|e| self.error_at("graph.variables", e.to_string()))?;
        let graph = match &g.structure {
            Structure::Chain { order } => build_chain_with(space, *order, g.counting)
                .map_err(|e| self.error_at("graph.order", e.to_string()))?,
            Structure::Pairs(pairs) => {
                let n = g.variables;
                let mut regions: Vec<Region> = (0..n)
                    .map(|v| Region {
                        id: v,
                        scope: vec![v],
                        parents: vec![],
                        children: vec![],
                        counting_number: g.counting.unary,
                        binding: PotentialBinding::Unary { variable: v },
                    })
                    .collect();
                for (i, p) in pairs.iter().enumerate() {
                    let key = format!("graph.region#{i}");
                    if p.a >= n || p.b >= n || p.a == p.b {
                        return Err(self.error_at(&key, format!("region {} {} needs two distinct variables below {n}", p.a, p.b)));
                    }
                    let (a, b) = (p.a.min(p.b), p.a.max(p.b));
                    if regions.iter().any(|r| r.scope == [a, b]) {
                        return Err(self.error_at(&key, format!("region {a} {b} declared twice")));
                    }
                    let id = regions.len();
                    regions[a].parents.push(id);
                    regions[b].parents.push(id);
                    regions.push(Region {
                        id,
                        scope: vec![a, b],
                        parents: vec![],
                        children: vec![a, b],
                        counting_number: g.counting.pairwise,
                        binding: PotentialBinding::Pairwise { class: p.class },
                    });
                }
                RegionGraph::new(space, regions)
            }
        };
        graph
            .ensure_valid(self.train.epsilon)
            .map_err(|e| self.error_at("graph.counting_unary", e.to_string()))?;
        Ok(graph)
    }

    fn build_unary(&self) -> Result<(ComputationGraph, NodeId)> {
        match &self.network {
            NetworkSpec::Mlp { input, hidden } => PotentialModel::mlp_unary(*input, hidden, self.graph.cardinality)
                .map_err(|e| self.error_at("network.input", e.to_string())),
            NetworkSpec::Nodes { nodes, output } => {
                let mut g = ComputationGraph::new();
                let mut declared_params = std::collections::HashSet::new();
                for (i, n) in nodes.iter().enumerate() {
                    let key = format!("network.node#{i}");
                    let at = |e: Error| self.error_at(&key, e.to_string());
                    let find = |g: &ComputationGraph, name: &str| {
                        g.find(name)
                            .ok_or_else(|| self.error_at(&key, format!("`{name}` is not declared above")))
                    };
                    if g.find(n.name()).is_some() {
                        return Err(self.error_at(&key, format!("node `{}` declared twice", n.name())));
                    }
                    match n {
                        NodeDecl::Input { name, dim } => {
                            if name != UNARY_INPUT {
                                return Err(self.error_at(
                                    &key,
                                    format!("the only input is `{UNARY_INPUT}`, got `{name}`"),
                                ));
                            }
                            g.input(name, ShapeSpec::rows(*dim)).map_err(at)?;
                        }
                        NodeDecl::Param { name, dims } => {
                            if !declared_params.insert(name.clone()) {
                                return Err(self.error_at(&key, format!("parameter `{name}` declared twice")));
                            }
                            g.parameter(name, name, dims).map_err(at)?;
                        }
                        NodeDecl::Affine { name, x, w, b } => {
                            let (x, w, b) = (find(&g, x)?, find(&g, w)?, find(&g, b)?);
                            g.affine(name, x, w, b).map_err(at)?;
                        }
                        NodeDecl::Relu { name, x } => {
                            let x = find(&g, x)?;
                            g.relu(name, x).map_err(at)?;
                        }
                        NodeDecl::Sigmoid { name, x } => {
                            let x = find(&g, x)?;
                            g.sigmoid(name, x).map_err(at)?;
                        }
                        NodeDecl::Softmax { name, x } => {
                            let x = find(&g, x)?;
                            g.softmax(name, x).map_err(at)?;
                        }
                        NodeDecl::Concat { name, xs } => {
                            let ids = xs.iter().map(|x| find(&g, x)).collect::<Result<Vec<_>>>()?;
                            g.concat(name, ids).map_err(at)?;
                        }
                        NodeDecl::Lookup { name, table, index } => {
                            let (t, ix) = (find(&g, table)?, find(&g, index)?);
                            g.lookup(name, t, ix).map_err(at)?;
                        }
                    }
                }
                let out = g
                    .find(output)
                    .ok_or_else(|| self.error_at("network.output", format!("output `{output}` is not a node")))?;
                Ok((g, out))
            }
        }
    }

    pub fn build_model(&self) -> Result<PotentialModel> {
        let (unary, out) = self.build_unary()?;
        let k = self.graph.cardinality;
        let pairwise = (0..self.graph.num_pairwise_classes())
            .map(|c| PairwiseModel::new(c, k, k, self.graph.pairwise))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| self.error_at("graph.pairwise", e.to_string()))?;
        let model = PotentialModel::new(unary, out, pairwise).map_err(|e| self.error_at("network.output", e.to_string()))?;
        Ok(model)
    }

    /// Errors unless the `[data]` vocabulary spells words of the graph's
    /// length.
    pub fn check_data_spec(&self) -> Result<()> {
        self.data
            .spec
            .validate()
            .map_err(|e| self.error_at("section.data", e.to_string()))?;
        if self.data.spec.word_len() != self.graph.variables {
            return Err(self.error_at(
                "data.vocabulary",
                format!(
                    "vocabulary words have {} letters but the graph has {} variables",
                    self.data.spec.word_len(),
                    self.graph.variables
                ),
            ));
        }
        Ok(())
    }

    /// Builds and cross-checks every object the document describes.
    pub fn instantiate(&self) -> Result<Instance> {
        self.train
            .validate()
            .map_err(|e| self.error_at("section.train", e.to_string()))?;
        self.data
            .spec
            .validate()
            .map_err(|e| self.error_at("section.data", e.to_string()))?;
        let graph = self.build_graph()?;
        let model = self.build_model()?;
        model
            .check_compatible(&graph)
            .map_err(|e| self.error_at("network.output", e.to_string()))?;
        Ok(Instance {
            graph,
            model,
            train: self.train.clone(),
            data: self.data.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[network]\ninput = 784\nhidden = 128\n\n[graph]\nvariables = 5\ncardinality = 26\n";

    #[test]
    fn minimal_doc_round_trips() {
        let doc = parse(MINIMAL).unwrap();
        assert_eq!(parse(&doc.serialize()).unwrap(), doc);
        assert_eq!(doc.serialize(), parse(&doc.serialize()).unwrap().serialize());
    }

    #[test]
    fn preset_builds_expected_shapes() {
        let inst = parse(MINIMAL).unwrap().instantiate().unwrap();
        let names: Vec<_> = inst.model.unary_graph().parameters();
        assert_eq!(
            names,
            vec![
                ("unary.W1".to_string(), vec![128, 784]),
                ("unary.b1".to_string(), vec![128]),
                ("unary.W2".to_string(), vec![26, 128]),
                ("unary.b2".to_string(), vec![26]),
            ]
        );
        assert_eq!(inst.graph.len(), 9);
        assert_eq!(inst.model.pairwise().len(), 1);
    }

    #[test]
    fn mlp_pairwise_and_hinge_mode() {
        let text = format!("{MINIMAL}pairwise = mlp\npairwise_hidden = 32\n[train]\nepsilon = 0\n");
        let inst = parse(&text).unwrap().instantiate().unwrap();
        assert_eq!(inst.model.pairwise()[0].kind, PairwiseKind::MlpTable { hidden: 32 });
        assert!(inst.train.is_hinge());
    }

    #[test]
    fn hash_tracks_structure_only() {
        let a = parse(MINIMAL).unwrap();
        let b = parse(&format!("{MINIMAL}[train]\nseed = 9\n")).unwrap();
        let c = parse(&MINIMAL.replace("hidden = 128", "hidden = 64")).unwrap();
        assert_eq!(a.structure_hash(), b.structure_hash());
        assert_ne!(a.structure_hash(), c.structure_hash());
    }

    #[test]
    fn explicit_nodes_with_sharing() {
        let text = "[network]\n\
            node = input x 4\n\
            node = param W 3 4\n\
            node = param b 3\n\
            node = affine out x W b\n\
            output = out\n\
            [graph]\nvariables = 3\ncardinality = 3\nregion = 0 1\nregion = 1 2\nregion = 0 2 class 1\n\
            [data]\nvocabulary = abc, cab\n";
        let doc = parse(text).unwrap();
        assert_eq!(parse(&doc.serialize()).unwrap(), doc);
        let inst = doc.instantiate().unwrap();
        assert_eq!(inst.graph.len(), 6);
        assert!(!inst.graph.is_tree());
        assert_eq!(inst.model.pairwise().len(), 2);
    }

    #[test]
    fn instantiate_errors_point_at_the_key() {
        let text = "[network]\nnode = input x 4\nnode = relu h y\noutput = h\n[graph]\nvariables = 5\ncardinality = 3\n";
        let err = parse(text).unwrap().instantiate().unwrap_err();
        match err {
            Error::Config(e) => assert_eq!((e.line, e.column), (3, 1)),
            e => panic!("{e}"),
        }

        let text = format!("{MINIMAL}counting_unary = -1\n");
        match parse(&text).unwrap().instantiate().unwrap_err() {
            Error::Config(e) => assert!(e.message.contains("negative weighted entropy"), "{e}"),
            e => panic!("{e}"),
        }

        let text = "[network]\ninput = 4\nhidden =\n[graph]\nvariables = 3\ncardinality = 3\n";
        parse(text).unwrap().instantiate().unwrap();
        match parse(text).unwrap().check_data_spec().unwrap_err() {
            Error::Config(e) => assert!(e.message.contains("letters"), "{e}"),
            e => panic!("{e}"),
        }
    }
}
