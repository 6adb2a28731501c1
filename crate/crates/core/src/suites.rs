//! Randomized checks of message passing against the enumeration oracles.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::inference::{
    beliefs_from_messages, dual_objective, message_pass, run_to_convergence, update_lambda, Convergence, MessageSet,
};
use crate::oracle::{brute_force_log_partition, brute_force_marginals, local_polytope_objective};
use crate::potentials::PotentialTables;
use crate::region::RegionGraph;

pub const EXACT_TOLERANCE: f64 = 1e-8;
pub const MONOTONE_TOLERANCE: f64 = 1e-9;

pub const CONVERGED: Convergence = Convergence {
    tolerance: 1e-13,
    max_sweeps: 20_000,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    TreeExactness,
    DualMonotonicity,
    UpperBound,
    Normalization,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::TreeExactness,
        Suite::DualMonotonicity,
        Suite::UpperBound,
        Suite::Normalization,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::TreeExactness => "tree-exactness",
            Suite::DualMonotonicity => "dual-monotonicity",
            Suite::UpperBound => "upper-bound",
            Suite::Normalization => "belief-normalization",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteFailure {
    pub suite: Suite,
    pub seed: u64,
    pub detail: String,
}

impl fmt::Display for SuiteFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} failed at seed {}: {}", self.suite.name(), self.seed, self.detail)
    }
}

/// Every region table drawn i.i.d. from `Normal(0, 1)`.
pub fn random_tables(graph: &RegionGraph, seed: u64) -> PotentialTables {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = PotentialTables::zeros(graph);
    for r in 0..graph.len() {
        t.region_mut(r)
            .iter_mut()
            .for_each(|v| *v = StandardNormal.sample(&mut rng));
    }
    t
}

/// Largest dual increase over single block updates during `sweeps` sweeps.
pub fn worst_block_increase(graph: &RegionGraph, tables: &PotentialTables, epsilon: f64, sweeps: usize) -> f64 {
    let mut m = MessageSet::zeros(graph, epsilon);
    let mut dual = dual_objective(graph, tables, &m);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..sweeps {
        for &r in graph.sweep_order() {
            update_lambda(graph, tables, &mut m, r);
            let next = dual_objective(graph, tables, &m);
            worst = worst.max(next - dual);
            dual = next;
        }
    }
    worst
}

/// Sweeps until the beliefs are locally consistent to `1e-11` (or
/// `CONVERGED.max_sweeps`), returning the dual.
pub fn converge_beliefs(graph: &RegionGraph, tables: &PotentialTables, messages: &mut MessageSet) -> f64 {
    for _ in 0..CONVERGED.max_sweeps / 10 {
        message_pass(graph, tables, messages, 10);
        if beliefs_from_messages(graph, tables, messages).max_consistency_gap(graph) < 1e-11 {
            break;
        }
    }
    dual_objective(graph, tables, messages)
}

/// Converged dual minus `ε ln Z`, and the largest belief deviation from the
/// exact marginals of the regions.
pub fn exactness_errors(graph: &RegionGraph, tables: &PotentialTables, epsilon: f64) -> Result<(f64, f64)> {
    let mut m = MessageSet::zeros(graph, epsilon);
    let dual = converge_beliefs(graph, tables, &mut m);
    let exact = brute_force_log_partition(graph, tables, epsilon)?;
    let beliefs = beliefs_from_messages(graph, tables, &m);
    let marginals = brute_force_marginals(graph, tables, epsilon)?;
    let gap = beliefs
        .regions()
        .iter()
        .zip(marginals.regions())
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    Ok((dual - exact, gap))
}

/// Runs every suite on one instance drawn from `seed`.
///
/// Tree exactness checks what holds for any nonnegative counting numbers:
/// the converged dual equals the primal value of its own beliefs, which are
/// locally consistent, and at `ε = 0` the dual equals the exact maximum.
pub fn run_trial(graph: &RegionGraph, epsilon: f64, seed: u64) -> Result<Vec<SuiteFailure>> {
    let tables = random_tables(graph, seed);
    let mut failures = Vec::new();
    let mut fail = |suite, detail: String| failures.push(SuiteFailure { suite, seed, detail });

    let mut m = MessageSet::zeros(graph, epsilon);
    let dual = converge_beliefs(graph, &tables, &mut m);
    let beliefs = beliefs_from_messages(graph, &tables, &m);

    if graph.is_tree() {
        let primal = local_polytope_objective(graph, &tables, &beliefs, epsilon);
        let gap = beliefs.max_consistency_gap(graph);
        if (dual - primal).abs() > EXACT_TOLERANCE || gap > EXACT_TOLERANCE {
            fail(
                Suite::TreeExactness,
                format!("dual {} vs primal {primal}, consistency gap {gap:e}", dual),
            );
        }
        let mut m0 = MessageSet::zeros(graph, 0.0);
        let dual0 = run_to_convergence(graph, &tables, &mut m0, CONVERGED).dual;
        let max = brute_force_log_partition(graph, &tables, 0.0)?;
        if (dual0 - max).abs() > EXACT_TOLERANCE {
            fail(Suite::TreeExactness, format!("zero-temperature dual {dual0} vs max score {max}"));
        }
    }

    let rise = worst_block_increase(graph, &tables, epsilon, 5);
    if rise > MONOTONE_TOLERANCE {
        fail(Suite::DualMonotonicity, format!("a block update raised the dual by {rise:e}"));
    }

    let exact = brute_force_log_partition(graph, &tables, epsilon)?;
    if dual < exact - MONOTONE_TOLERANCE {
        fail(Suite::UpperBound, format!("dual {} below exact {exact}", dual));
    }

    for (r, b) in beliefs.regions().iter().enumerate() {
        let total: f64 = b.iter().sum();
        if (total - 1.0).abs() > EXACT_TOLERANCE || b.iter().any(|&p| !(p >= 0.0)) {
            fail(Suite::Normalization, format!("region {r} beliefs sum to {total}"));
            break;
        }
    }
    Ok(failures)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub trials: usize,
    pub failures: Vec<SuiteFailure>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// `trials` instances with seeds `seed, seed + 1, …`; a failing seed replays
/// with `trials = 1`.
pub fn run_suites(graph: &RegionGraph, epsilon: f64, trials: usize, seed: u64) -> Result<SuiteReport> {
    graph.ensure_valid(epsilon)?;
    let mut failures = Vec::new();
    for t in 0..trials {
        failures.extend(run_trial(graph, epsilon, seed.wrapping_add(t as u64))?);
    }
    Ok(SuiteReport { trials, failures })
}
