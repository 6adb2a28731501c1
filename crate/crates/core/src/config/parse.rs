use std::str::FromStr;

use crate::data::{Background, DatasetSpec};
use crate::error::{ConfigError, Result};
use crate::learning::TrainConfig;
use crate::potentials::PairwiseKind;
use crate::region::CountingNumbers;

use super::{DataSection, GraphSpec, ModelSpecDoc, NetworkSpec, NodeDecl, PairDecl, Spans, Structure};

const DEFAULT_PAIRWISE_HIDDEN: usize = 32;

const SECTIONS: [(&str, &[&str]); 4] = [
    ("network", &["input", "hidden", "node", "output"]),
    (
        "graph",
        &[
            "variables",
            "cardinality",
            "order",
            "region",
            "counting_unary",
            "counting_pairwise",
            "pairwise",
            "pairwise_hidden",
        ],
    ),
    (
        "train",
        &[
            "epsilon",
            "step_size",
            "momentum",
            "batch_size",
            "max_iterations",
            "message_sweeps_per_update",
            "step_decay",
            "strategy",
            "algorithm",
            "loss_augment_weight",
            "seed",
            "pretrain_iterations",
            "pretrained_step_size",
            "validate_every",
            "eval_sweeps",
        ],
    ),
    (
        "data",
        &[
            "path",
            "train",
            "val",
            "test",
            "rotation",
            "scale_min",
            "scale_max",
            "translation",
            "noise",
            "background",
            "seed",
            "vocabulary",
        ],
    ),
];

const REPEATABLE: [&str; 2] = ["node", "region"];

struct Entry {
    key: String,
    value: String,
    line: usize,
    key_col: usize,
    val_col: usize,
}

struct Section {
    name: String,
    line: usize,
    col: usize,
    entries: Vec<Entry>,
}

impl Section {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a Entry> + 'a {
        self.entries.iter().filter(move |e| e.key == key)
    }

    fn missing(&self, key: &str) -> ConfigError {
        ConfigError::new(self.line, self.col, format!("[{}] is missing `{key}`", self.name))
    }
}

fn err(line: usize, column: usize, msg: impl Into<String>) -> crate::error::Error {
    ConfigError::new(line, column, msg).into()
}

impl Entry {
    fn error(&self, msg: impl Into<String>) -> crate::error::Error {
        err(self.line, self.val_col, msg)
    }

    fn uint(&self) -> Result<usize> {
        self.value
            .parse()
            .map_err(|_| self.error(format!("`{}` expects a nonnegative integer, got `{}`", self.key, self.value)))
    }

    fn u64(&self) -> Result<u64> {
        self.value
            .parse()
            .map_err(|_| self.error(format!("`{}` expects a nonnegative integer, got `{}`", self.key, self.value)))
    }

    fn float(&self) -> Result<f64> {
        match self.value.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.error(format!("`{}` expects a finite number, got `{}`", self.key, self.value))),
        }
    }

    fn parsed<T: FromStr<Err = crate::error::Error>>(&self) -> Result<T> {
        self.value.parse().map_err(|e: crate::error::Error| self.error(e.to_string()))
    }

    fn list(&self) -> Vec<&str> {
        self.value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
    }
}

fn column_of(line: &str, sub: &str) -> usize {
    let offset = sub.as_ptr() as usize - line.as_ptr() as usize;
    line[..offset].chars().count() + 1
}

fn lex(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() || trimmed.starts_with(';') {
            continue;
        }
        let col = column_of(raw, trimmed);
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(err(line_no, col, "unterminated section header"));
            };
            let name = name.trim();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                return Err(err(line_no, col + 1, format!("unknown section [{name}]")));
            }
            if sections.iter().any(|s| s.name == name) {
                return Err(err(line_no, col, format!("duplicate section [{name}]")));
            }
            sections.push(Section {
                name: name.to_string(),
                line: line_no,
                col,
                entries: Vec::new(),
            });
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(err(line_no, col, "expected `key = value` or `[section]`"));
        };
        let key = k.trim();
        let value = v.trim();
        let key_col = column_of(raw, key);
        let val_col = if value.is_empty() {
            column_of(raw, v) + v.chars().count()
        } else {
            column_of(raw, value)
        };
        let Some(section) = sections.last_mut() else {
            return Err(err(line_no, key_col, format!("`{key}` appears before any section")));
        };
        let known = SECTIONS.iter().find(|(s, _)| *s == section.name).expect("known section").1;
        if !known.contains(&key) {
            return Err(err(line_no, key_col, format!("unknown key `{key}` in [{}]", section.name)));
        }
        if !REPEATABLE.contains(&key) && section.get(key).is_some() {
            return Err(err(line_no, key_col, format!("duplicate key `{key}` in [{}]", section.name)));
        }
        section.entries.push(Entry {
            key: key.to_string(),
            value: value.to_string(),
            line: line_no,
            key_col,
            val_col,
        });
    }
    Ok(sections)
}

fn ident(e: &Entry, tok: &str) -> Result<String> {
    if tok.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') && !tok.is_empty() {
        Ok(tok.to_string())
    } else {
        Err(e.error(format!("`{tok}` is not a valid node name")))
    }
}

fn node_decl(e: &Entry) -> Result<NodeDecl> {
    let toks: Vec<&str> = e.value.split_whitespace().collect();
    let arity = |n: usize, usage: &str| {
        if toks.len() == n {
            Ok(())
        } else {
            Err(e.error(format!("expected `node = {usage}`")))
        }
    };
    let dim = |t: &str| -> Result<usize> {
        match t.parse::<usize>() {
            Ok(d) if d > 0 => Ok(d),
            _ => Err(e.error(format!("dimension `{t}` must be a positive integer"))),
        }
    };
    let kind = toks.first().copied().unwrap_or("");
    let name = |i: usize| ident(e, toks[i]);
    Ok(match kind {
        "input" => {
            arity(3, "input <name> <dim>")?;
            NodeDecl::Input {
                name: name(1)?,
                dim: dim(toks[2])?,
            }
        }
        "param" => {
            if toks.len() < 3 {
                return Err(e.error("expected `node = param <name> <dim>...`"));
            }
            NodeDecl::Param {
                name: name(1)?,
                dims: toks[2..].iter().map(|t| dim(t)).collect::<Result<_>>()?,
            }
        }
        "affine" => {
            arity(5, "affine <name> <x> <W> <b>")?;
            NodeDecl::Affine {
                name: name(1)?,
                x: name(2)?,
                w: name(3)?,
                b: name(4)?,
            }
        }
        "relu" | "sigmoid" | "softmax" => {
            arity(3, &format!("{kind} <name> <x>"))?;
            let (n, x) = (name(1)?, name(2)?);
            match kind {
                "relu" => NodeDecl::Relu { name: n, x },
                "sigmoid" => NodeDecl::Sigmoid { name: n, x },
                _ => NodeDecl::Softmax { name: n, x },
            }
        }
        "concat" => {
            if toks.len() < 3 {
                return Err(e.error("expected `node = concat <name> <x>...`"));
            }
            NodeDecl::Concat {
                name: name(1)?,
                xs: (2..toks.len()).map(name).collect::<Result<_>>()?,
            }
        }
        "lookup" => {
            arity(4, "lookup <name> <table> <index>")?;
            NodeDecl::Lookup {
                name: name(1)?,
                table: name(2)?,
                index: name(3)?,
            }
        }
        _ => {
            return Err(e.error(format!(
                "unknown node kind `{kind}` (input | param | affine | relu | sigmoid | softmax | concat | lookup)"
            )))
        }
    })
}

fn network(s: &Section, spans: &mut Spans) -> Result<NetworkSpec> {
    let nodes: Vec<&Entry> = s.all("node").collect();
    if nodes.is_empty() {
        if let Some(o) = s.get("output") {
            return Err(err(o.line, o.key_col, "`output` needs `node` declarations"));
        }
        let input = s.get("input").ok_or_else(|| s.missing("input"))?;
        spans.push("network.input".into(), input.line, input.key_col);
        let dim = input.uint()?;
        if dim == 0 {
            return Err(input.error("`input` must be positive"));
        }
        let hidden = match s.get("hidden") {
            None => Vec::new(),
            Some(h) => h
                .list()
                .into_iter()
                .map(|t| match t.parse::<usize>() {
                    Ok(d) if d > 0 => Ok(d),
                    _ => Err(h.error(format!("hidden width `{t}` must be a positive integer"))),
                })
                .collect::<Result<_>>()?,
        };
        return Ok(NetworkSpec::Mlp { input: dim, hidden });
    }
    if let Some(e) = s.get("input").or_else(|| s.get("hidden")) {
        return Err(err(e.line, e.key_col, format!("`{}` cannot be combined with `node` declarations", e.key)));
    }
    let decls = nodes
        .iter()
        .enumerate()
        .map(|(i, e)| {
            spans.push(format!("network.node#{i}"), e.line, e.key_col);
            node_decl(e)
        })
        .collect::<Result<Vec<_>>>()?;
    let output = s.get("output").ok_or_else(|| s.missing("output"))?;
    spans.push("network.output".into(), output.line, output.key_col);
    Ok(NetworkSpec::Nodes {
        nodes: decls,
        output: ident(output, &output.value)?,
    })
}

fn graph(s: &Section, spans: &mut Spans) -> Result<GraphSpec> {
    for e in &s.entries {
        if e.key != "region" {
            spans.push(format!("graph.{}", e.key), e.line, e.key_col);
        }
    }
    let variables = s.get("variables").ok_or_else(|| s.missing("variables"))?.uint()?;
    let cardinality = s.get("cardinality").ok_or_else(|| s.missing("cardinality"))?.uint()?;
    let regions: Vec<&Entry> = s.all("region").collect();
    let structure = match (s.get("order"), regions.is_empty()) {
        (Some(o), false) => {
            return Err(err(o.line, o.key_col, "`order` cannot be combined with `region` lines"));
        }
        (Some(o), true) => {
            let order = o.uint().ok().filter(|k| (1..=2).contains(k));
            Structure::Chain {
                order: order.ok_or_else(|| o.error("order must be 1 or 2"))?,
            }
        }
        (None, true) => Structure::Chain { order: 1 },
        (None, false) => Structure::Pairs(
            regions
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    spans.push(format!("graph.region#{i}"), e.line, e.key_col);
                    let toks: Vec<&str> = e.value.split_whitespace().collect();
                    let num = |t: &str| {
                        t.parse::<usize>()
                            .map_err(|_| e.error(format!("`{t}` is not a variable index")))
                    };
                    match toks.as_slice() {
                        [a, b] => Ok(PairDecl {
                            a: num(a)?,
                            b: num(b)?,
                            class: 0,
                        }),
                        [a, b, "class", c] => Ok(PairDecl {
                            a: num(a)?,
                            b: num(b)?,
                            class: num(c)?,
                        }),
                        _ => Err(e.error("expected `region = <a> <b> [class <c>]`")),
                    }
                })
                .collect::<Result<_>>()?,
        ),
    };
    let defaults = CountingNumbers::default();
    let counting = CountingNumbers {
        unary: s.get("counting_unary").map_or(Ok(defaults.unary), Entry::float)?,
        pairwise: s.get("counting_pairwise").map_or(Ok(defaults.pairwise), Entry::float)?,
    };
    let hidden = s.get("pairwise_hidden");
    let pairwise = match s.get("pairwise").map(|e| (e, e.value.as_str())) {
        None | Some((_, "linear")) => {
            if let Some(h) = hidden {
                return Err(err(h.line, h.key_col, "`pairwise_hidden` requires `pairwise = mlp`"));
            }
            PairwiseKind::Linear
        }
        Some((_, "mlp")) => {
            let h = hidden.map_or(Ok(DEFAULT_PAIRWISE_HIDDEN), Entry::uint)?;
            if h == 0 {
                return Err(hidden.expect("explicit zero").error("`pairwise_hidden` must be positive"));
            }
            PairwiseKind::MlpTable { hidden: h }
        }
        Some((e, other)) => return Err(e.error(format!("unknown pairwise kind `{other}` (linear | mlp)"))),
    };
    Ok(GraphSpec {
        variables,
        cardinality,
        structure,
        counting,
        pairwise,
    })
}

fn train(s: Option<&Section>) -> Result<TrainConfig> {
    let mut t = TrainConfig::default();
    let Some(s) = s else { return Ok(t) };
    for e in &s.entries {
        match e.key.as_str() {
            "epsilon" => t.epsilon = e.float()?,
            "step_size" => t.step_size = e.float()?,
            "momentum" => t.momentum = e.float()?,
            "batch_size" => t.batch_size = e.uint()?,
            "max_iterations" => t.max_iterations = e.uint()?,
            "message_sweeps_per_update" => t.message_sweeps_per_update = e.uint()?,
            "step_decay" => t.step_decay = e.float()?,
            "strategy" => t.strategy = e.parsed()?,
            "algorithm" => t.algorithm = e.parsed()?,
            "loss_augment_weight" => t.loss_augment_weight = e.float()?,
            "seed" => t.seed = e.u64()?,
            "pretrain_iterations" => t.pretrain_iterations = e.uint()?,
            "pretrained_step_size" => t.pretrained_step_size = e.float()?,
            "validate_every" => t.validate_every = e.uint()?,
            "eval_sweeps" => t.eval_sweeps = e.uint()?,
            _ => unreachable!("keys are checked while lexing"),
        }
    }
    Ok(t)
}

fn data(s: Option<&Section>, spans: &mut Spans) -> Result<DataSection> {
    let mut d = DataSection {
        path: None,
        spec: DatasetSpec::default(),
    };
    let Some(s) = s else { return Ok(d) };
    for e in &s.entries {
        spans.push(format!("data.{}", e.key), e.line, e.key_col);
        let spec = &mut d.spec;
        match e.key.as_str() {
            "path" => d.path = Some(e.value.clone()),
            "train" => spec.train = e.uint()?,
            "val" => spec.validation = e.uint()?,
            "test" => spec.test = e.uint()?,
            "rotation" => spec.rotation = e.float()?,
            "scale_min" => spec.scale_min = e.float()?,
            "scale_max" => spec.scale_max = e.float()?,
            "translation" => spec.translation = e.float()?,
            "noise" => spec.noise = e.float()?,
            "background" => spec.background = e.parsed::<Background>()?,
            "seed" => spec.seed = e.u64()?,
            "vocabulary" => spec.vocabulary = e.list().into_iter().map(str::to_string).collect(),
            _ => unreachable!("keys are checked while lexing"),
        }
    }
    Ok(d)
}

/// Parses a configuration, returning the first problem with its line and
/// column.
pub fn parse(text: &str) -> Result<ModelSpecDoc> {
    let sections = lex(text)?;
    let find = |name: &str| sections.iter().find(|s| s.name == name);
    let mut spans = Spans::default();
    for s in &sections {
        spans.push(format!("section.{}", s.name), s.line, s.col);
    }
    let graph_section = find("graph").ok_or_else(|| ConfigError::new(1, 1, "missing required section [graph]"))?;
    let network_section =
        find("network").ok_or_else(|| ConfigError::new(1, 1, "missing required section [network]"))?;

    // Value errors are reported in file order.
    let mut ordered: Vec<&Section> = sections.iter().collect();
    ordered.sort_by_key(|s| s.line);
    let (mut net, mut gr, mut tr, mut da) = (None, None, None, None);
    for s in ordered {
        match s.name.as_str() {
            "network" => net = Some(network(network_section, &mut spans)?),
            "graph" => gr = Some(graph(graph_section, &mut spans)?),
            "train" => tr = Some(train(Some(s))?),
            "data" => da = Some(data(Some(s), &mut spans)?),
            _ => unreachable!("sections are checked while lexing"),
        }
    }
    Ok(ModelSpecDoc {
        network: net.expect("network parsed"),
        graph: gr.expect("graph parsed"),
        train: match tr {
            Some(t) => t,
            None => train(None)?,
        },
        data: match da {
            Some(d) => d,
            None => data(None, &mut spans)?,
        },
        spans,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn located(text: &str) -> (usize, usize, String) {
        match parse(text) {
            Err(Error::Config(e)) => (e.line, e.column, e.message),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    const BASE: &str = "[network]\ninput = 784\nhidden = 128\n[graph]\nvariables = 5\ncardinality = 26\n";

    #[test]
    fn empty_text_lacks_graph() {
        let (l, c, m) = located("");
        assert_eq!((l, c, m.as_str()), (1, 1, "missing required section [graph]"));
        assert_eq!(located("[graph]\nvariables = 5\ncardinality = 26\n").2, "missing required section [network]");
    }

    #[test]
    fn order_three_is_rejected_at_the_value() {
        let (l, c, m) = located(&format!("{BASE}order = 3\n"));
        assert_eq!((l, c, m.as_str()), (7, 9, "order must be 1 or 2"));
    }

    #[test]
    fn unknown_keys_and_sections() {
        let (l, c, m) = located(&format!("{BASE}  colour = red\n"));
        assert_eq!((l, c), (7, 3));
        assert!(m.contains("unknown key `colour`"));
        let (l, c, m) = located("[nework]\n");
        assert_eq!((l, c), (1, 2));
        assert!(m.contains("unknown section"));
        assert!(located("stray = 1\n").2.contains("before any section"));
        assert!(located("[graph\n").2.contains("unterminated"));
        assert!(located("[graph]\njunk\n").2.contains("key = value"));
    }

    #[test]
    fn duplicates_are_errors_except_repeatable_keys() {
        let (l, _, m) = located(&format!("{BASE}variables = 6\n"));
        assert_eq!(l, 7);
        assert!(m.contains("duplicate key"));
        assert!(located(&format!("{BASE}[graph]\n")).2.contains("duplicate section"));
        parse(&format!("{BASE}region = 0 1\nregion = 1 2 class 1\n")).unwrap();
    }

    #[test]
    fn first_error_wins() {
        let text = "[network]\ninput = abc\n[graph]\nvariables = 5\ncardinality = 26\norder = 7\n";
        assert_eq!(located(text).0, 2);
    }

    #[test]
    fn comments_and_blank_values() {
        let doc = parse("# header\n[network]\ninput = 784 # trailing\nhidden =\n; note\n[graph]\nvariables = 5\ncardinality = 26\n").unwrap();
        assert_eq!(doc.network, NetworkSpec::Mlp { input: 784, hidden: vec![] });
        assert_eq!(doc.graph.structure, Structure::Chain { order: 1 });
    }

    #[test]
    fn typed_value_errors() {
        assert!(located(&format!("{BASE}[train]\nstrategy = greedy\n")).2.contains("unknown strategy"));
        assert!(located(&format!("{BASE}[train]\nepsilon = inf\n")).2.contains("finite"));
        assert!(located(&format!("{BASE}pairwise = cubic\n")).2.contains("pairwise kind"));
        assert!(located(&format!("{BASE}pairwise_hidden = 4\n")).2.contains("requires"));
        assert!(located(&format!("{BASE}order = 1\nregion = 0 1\n")).2.contains("cannot be combined"));
        assert!(located(&format!("{BASE}region = 0\n")).2.contains("expected"));
        assert!(located("[network]\nnode = tanh h x\noutput = h\n[graph]\nvariables = 2\ncardinality = 2\n")
            .2
            .contains("unknown node kind"));
        assert!(located("[network]\ninput = 4\nnode = input x 4\n[graph]\nvariables = 2\ncardinality = 2\n")
            .2
            .contains("cannot be combined"));
        assert!(located("[network]\nhidden = 3\n[graph]\nvariables = 2\ncardinality = 2\n")
            .2
            .contains("missing `input`"));
    }
}
