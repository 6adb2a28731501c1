//! Convex message passing on region graphs.
//!
//! The messages `λ_{r→p}` are the Lagrange multipliers of the local-polytope
//! marginalization constraints. Each region visit is the closed-form
//! block-coordinate minimizer of the dual over `{λ_{r→p}}_{p∈P(r)}`, so the
//! dual never increases as long as every `ε·c_r ≥ 0`.

use crate::math::{annealed_softmax_into, soft_max_value};
use crate::potentials::PotentialTables;
use crate::region::{EdgeId, RegionGraph, RegionId};

/// Absolute tolerance for maximizer ties when `ε·c_r = 0`.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Stopping rule for [`run_to_convergence`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for Convergence {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_sweeps: 1000,
        }
    }
}

/// Multipliers `λ_{r→p}(ŷ_r)` per edge, plus the latest `μ_{p→r}(ŷ_r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageSet {
    epsilon: f64,
    lambda: Vec<Vec<f64>>,
    mu: Vec<Vec<f64>>,
}

impl MessageSet {
    pub fn zeros(graph: &RegionGraph, epsilon: f64) -> Self {
        let lambda: Vec<Vec<f64>> = graph
            .edges()
            .iter()
            .map(|e| vec![0.0; graph.table_size(e.child)])
            .collect();
        Self {
            epsilon,
            mu: lambda.clone(),
            lambda,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn lambda(&self, e: EdgeId) -> &[f64] {
        &self.lambda[e]
    }

    pub fn lambda_mut(&mut self, e: EdgeId) -> &mut [f64] {
        &mut self.lambda[e]
    }

    pub fn mu(&self, e: EdgeId) -> &[f64] {
        &self.mu[e]
    }

    pub fn reset(&mut self) {
        self.lambda.iter_mut().flatten().for_each(|v| *v = 0.0);
        self.mu.iter_mut().flatten().for_each(|v| *v = 0.0);
    }

    pub fn is_finite(&self) -> bool {
        self.lambda.iter().flatten().all(|v| v.is_finite())
    }
}

/// Per-region beliefs `b_r(ŷ_r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefSet {
    beliefs: Vec<Vec<f64>>,
}

impl BeliefSet {
    pub fn new(beliefs: Vec<Vec<f64>>) -> Self {
        Self { beliefs }
    }

    pub fn region(&self, r: RegionId) -> &[f64] {
        &self.beliefs[r]
    }

    pub fn regions(&self) -> &[Vec<f64>] {
        &self.beliefs
    }

    /// Largest `|Σ_{ŷ_p∖ŷ_r} b_p − b_r|` over all edges.
    pub fn max_consistency_gap(&self, graph: &RegionGraph) -> f64 {
        let mut worst = 0.0f64;
        for e in graph.edges() {
            let mut m = vec![0.0; self.beliefs[e.child].len()];
            for (i, &b) in self.beliefs[e.parent].iter().enumerate() {
                m[e.projection[i] as usize] += b;
            }
            for (a, b) in m.iter().zip(&self.beliefs[e.child]) {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }
}

/// `f̂_r = f_r + Σ_{c∈C(r)} λ_{c→r} − Σ_{p∈P(r)} λ_{r→p}`.
pub fn reparameterized(
    graph: &RegionGraph,
    tables: &PotentialTables,
    messages: &MessageSet,
    r: RegionId,
) -> Vec<f64> {
    let mut out = tables.region(r).to_vec();
    for &e in graph.child_edges(r) {
        let edge = graph.edge(e);
        let lam = &messages.lambda[e];
        for (v, &c) in out.iter_mut().zip(&edge.projection) {
            *v += lam[c as usize];
        }
    }
    for &e in graph.parent_edges(r) {
        for (v, l) in out.iter_mut().zip(&messages.lambda[e]) {
            *v -= l;
        }
    }
    out
}

fn edge_between(graph: &RegionGraph, r: RegionId, p: RegionId) -> Option<EdgeId> {
    graph
        .parent_edges(r)
        .iter()
        .copied()
        .find(|&e| graph.edge(e).parent == p)
}

/// `μ_{p→r}` for the edge `e = (r → p)`, written into `out`.
fn mu_into(graph: &RegionGraph, tables: &PotentialTables, messages: &MessageSet, e: EdgeId, out: &mut [f64]) {
    let edge = graph.edge(e);
    let p = edge.parent;
    let temp = messages.epsilon * graph.region(p).counting_number;
    let mut vals = reparameterized(graph, tables, messages, p);
    let own = &messages.lambda[e];
    for (v, &c) in vals.iter_mut().zip(&edge.projection) {
        *v -= own[c as usize];
    }
    out.iter_mut().for_each(|m| *m = f64::NEG_INFINITY);
    for (&v, &c) in vals.iter().zip(&edge.projection) {
        let m = &mut out[c as usize];
        if v > *m {
            *m = v;
        }
    }
    if temp == 0.0 {
        return;
    }
    let mut sums = vec![0.0; out.len()];
    for (&v, &c) in vals.iter().zip(&edge.projection) {
        let c = c as usize;
        sums[c] += ((v - out[c]) / temp).exp();
    }
    for (m, s) in out.iter_mut().zip(sums) {
        *m += temp * s.ln();
    }
}

/// `μ_{p→r}(ŷ_r)`: the annealed max-marginal of the parent's score with the
/// `r → p` multiplier removed. `p` must be a parent of `r`.
pub fn compute_mu(
    graph: &RegionGraph,
    tables: &PotentialTables,
    messages: &MessageSet,
    r: RegionId,
    p: RegionId,
) -> Vec<f64> {
    let e = edge_between(graph, r, p).expect("p must be a parent of r");
    let mut out = vec![0.0; graph.table_size(r)];
    mu_into(graph, tables, messages, e, &mut out);
    out
}

/// `c̃_{r,p} = c_p / (c_r + Σ_{p'∈P(r)} c_{p'})`. When every counting number
/// involved is zero the weights fall back to an even split.
pub fn update_weight(graph: &RegionGraph, r: RegionId, p: RegionId) -> f64 {
    let region = graph.region(r);
    let denom = region.counting_number
        + region
            .parents
            .iter()
            .map(|&q| graph.region(q).counting_number)
            .sum::<f64>();
    if denom == 0.0 {
        1.0 / (1 + region.parents.len()) as f64
    } else {
        graph.region(p).counting_number / denom
    }
}

/// Block update of every `λ_{r→p}`, `p ∈ P(r)`, followed by mean-centering
/// each updated vector. No-op when `r` has no parents.
pub fn update_lambda(graph: &RegionGraph, tables: &PotentialTables, messages: &mut MessageSet, r: RegionId) {
    let up = graph.parent_edges(r);
    if up.is_empty() {
        return;
    }
    let size = graph.table_size(r);
    for &e in up {
        let mut mu = std::mem::take(&mut messages.mu[e]);
        mu.resize(size, 0.0);
        mu_into(graph, tables, messages, e, &mut mu);
        messages.mu[e] = mu;
    }
    // S(ŷ_r) = f_r + Σ_c λ_{c→r} + Σ_p μ_{p→r}
    let mut total = tables.region(r).to_vec();
    for &e in graph.child_edges(r) {
        let edge = graph.edge(e);
        let lam = &messages.lambda[e];
        for (v, &c) in total.iter_mut().zip(&edge.projection) {
            *v += lam[c as usize];
        }
    }
    for &e in up {
        for (v, m) in total.iter_mut().zip(&messages.mu[e]) {
            *v += m;
        }
    }
    for &e in up {
        let w = update_weight(graph, r, graph.edge(e).parent);
        let mu = &messages.mu[e];
        let lam = &mut messages.lambda[e];
        for ((l, &s), &m) in lam.iter_mut().zip(&total).zip(mu) {
            *l = w * s - m;
        }
        let mean = lam.iter().sum::<f64>() / lam.len() as f64;
        lam.iter_mut().for_each(|l| *l -= mean);
    }
}

/// One pass over all regions with parents, in the graph's sweep order.
pub fn sweep(graph: &RegionGraph, tables: &PotentialTables, messages: &mut MessageSet) {
    for &r in graph.sweep_order() {
        update_lambda(graph, tables, messages, r);
    }
}

/// `iterations` full sweeps.
pub fn message_pass(graph: &RegionGraph, tables: &PotentialTables, messages: &mut MessageSet, iterations: usize) {
    for _ in 0..iterations {
        sweep(graph, tables, messages);
    }
}

/// Outcome of [`run_to_convergence`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    pub sweeps: usize,
    pub dual: f64,
    pub converged: bool,
}

/// Sweeps until the dual changes by less than `rule.tolerance` in one sweep
/// or `rule.max_sweeps` is reached.
pub fn run_to_convergence(
    graph: &RegionGraph,
    tables: &PotentialTables,
    messages: &mut MessageSet,
    rule: Convergence,
) -> ConvergenceReport {
    let mut dual = dual_objective(graph, tables, messages);
    for s in 1..=rule.max_sweeps {
        sweep(graph, tables, messages);
        let next = dual_objective(graph, tables, messages);
        let change = (dual - next).abs();
        dual = next;
        if change < rule.tolerance {
            return ConvergenceReport {
                sweeps: s,
                dual,
                converged: true,
            };
        }
    }
    ConvergenceReport {
        sweeps: rule.max_sweeps,
        dual,
        converged: rule.max_sweeps == 0,
    }
}

/// `Σ_r ε c_r ln Σ_{ŷ_r} exp(f̂_r / (ε c_r))`, with `max f̂_r` for `ε c_r = 0`.
pub fn dual_objective(graph: &RegionGraph, tables: &PotentialTables, messages: &MessageSet) -> f64 {
    (0..graph.len())
        .map(|r| {
            let temp = messages.epsilon * graph.region(r).counting_number;
            soft_max_value(&reparameterized(graph, tables, messages, r), temp)
        })
        .sum()
}

/// `b_r ∝ exp(f̂_r / (ε c_r))`, or uniform over the maximizers of `f̂_r`
/// when `ε c_r = 0`.
pub fn beliefs_from_messages(graph: &RegionGraph, tables: &PotentialTables, messages: &MessageSet) -> BeliefSet {
    let beliefs = (0..graph.len())
        .map(|r| {
            let temp = messages.epsilon * graph.region(r).counting_number;
            let scores = reparameterized(graph, tables, messages, r);
            let mut b = vec![0.0; scores.len()];
            annealed_softmax_into(&scores, temp, TIE_TOLERANCE, &mut b);
            b
        })
        .collect();
    BeliefSet { beliefs }
}

/// Per-variable argmax of the variable's belief; ties go to the lowest label.
pub fn decode_beliefs(graph: &RegionGraph, beliefs: &BeliefSet) -> Vec<usize> {
    let n = graph.space().num_variables();
    (0..n)
        .map(|v| {
            let marginal: Vec<f64> = match graph.unary_region(v) {
                Some(r) => beliefs.region(r).to_vec(),
                None => {
                    let Some(r) = graph.regions().iter().find(|r| r.scope.contains(&v)) else {
                        return 0;
                    };
                    let pos = r.scope.iter().position(|&u| u == v).unwrap();
                    let mut m = vec![0.0; graph.space().cardinality(v)];
                    for (i, &b) in beliefs.region(r.id).iter().enumerate() {
                        m[graph.local_labels(r.id, i)[pos]] += b;
                    }
                    m
                }
            };
            argmax(&marginal)
        })
        .collect()
}

/// Decodes an assignment from the current messages.
pub fn map_decode(graph: &RegionGraph, tables: &PotentialTables, messages: &MessageSet) -> Vec<usize> {
    decode_beliefs(graph, &beliefs_from_messages(graph, tables, messages))
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::potentials::score_configuration;
    use crate::region::{build_chain_model, build_chain_with, CountingNumbers, PotentialBinding, Region, VariableSpace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tables(graph: &RegionGraph, rng: &mut impl Rng, scale: f64) -> PotentialTables {
        let tables = (0..graph.len())
            .map(|r| (0..graph.table_size(r)).map(|_| rng.gen_range(-scale..scale)).collect())
            .collect();
        PotentialTables::from_tables(graph, tables).unwrap()
    }

    fn random_messages(graph: &RegionGraph, eps: f64, rng: &mut impl Rng) -> MessageSet {
        let mut m = MessageSet::zeros(graph, eps);
        for e in 0..graph.edges().len() {
            m.lambda_mut(e).iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        }
        m
    }

    fn single(k: usize, c: f64) -> RegionGraph {
        RegionGraph::new(
            VariableSpace::uniform(1, k).unwrap(),
            vec![Region {
                id: 0,
                scope: vec![0],
                parents: vec![],
                children: vec![],
                counting_number: c,
                binding: PotentialBinding::Unary { variable: 0 },
            }],
        )
    }

    #[test]
    fn mu_of_uniform_pair() {
        let g = build_chain_model(2, 2, 1).unwrap();
        let t = PotentialTables::zeros(&g);
        let mu = compute_mu(&g, &t, &MessageSet::zeros(&g, 1.0), 0, 2);
        for v in mu {
            assert!((v - 2f64.ln()).abs() < 1e-15);
        }
        let mu = compute_mu(&g, &t, &MessageSet::zeros(&g, 0.0), 0, 2);
        assert_eq!(mu, vec![0.0, 0.0]);
    }

    #[test]
    fn mu_matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = build_chain_model(4, 3, 2).unwrap();
        let t = random_tables(&g, &mut rng, 2.0);
        for &eps in &[1.0, 0.5] {
            let m = random_messages(&g, eps, &mut rng);
            for e in g.edges() {
                let (r, p) = (e.child, e.parent);
                let got = compute_mu(&g, &t, &m, r, p);
                let pr = g.region(p);
                let tp = eps * pr.counting_number;
                // Direct: sum over parent entries mapping to each child label.
                let mut sums = vec![0.0f64; got.len()];
                for idx in 0..g.table_size(p) {
                    let labels = g.local_labels(p, idx);
                    let mut y = vec![0; 4];
                    for (&v, &l) in pr.scope.iter().zip(&labels) {
                        y[v] = l;
                    }
                    let mut val = t.region(p)[idx];
                    for &q in &pr.parents {
                        let ee = edge_between(&g, p, q).unwrap();
                        val -= m.lambda(ee)[idx];
                    }
                    for &c in &pr.children {
                        if c == r {
                            continue;
                        }
                        let ee = edge_between(&g, c, p).unwrap();
                        val += m.lambda(ee)[g.local_index(c, &y)];
                    }
                    sums[g.local_index(r, &y)] += (val / tp).exp();
                }
                for (a, s) in got.iter().zip(sums) {
                    assert!((a - tp * s.ln()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_input_is_a_fixed_point() {
        let g = build_chain_model(4, 3, 2).unwrap();
        let t = PotentialTables::zeros(&g);
        let mut m = MessageSet::zeros(&g, 1.0);
        message_pass(&g, &t, &mut m, 3);
        assert!(m.lambda.iter().flatten().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn update_weight_single_parent() {
        let g = build_chain_model(2, 2, 1).unwrap();
        assert_eq!(update_weight(&g, 0, 2), 0.5);
        let g = build_chain_model(3, 2, 1).unwrap();
        assert!((update_weight(&g, 1, 3) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn every_update_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(order, eps) in &[(1, 1.0), (2, 1.0), (2, 0.3), (2, 0.0), (1, 0.0)] {
            let g = build_chain_model(5, 3, order).unwrap();
            for _ in 0..5 {
                let t = random_tables(&g, &mut rng, 3.0);
                let mut m = random_messages(&g, eps, &mut rng);
                let mut before = dual_objective(&g, &t, &m);
                for _ in 0..5 {
                    for &r in g.sweep_order() {
                        update_lambda(&g, &t, &mut m, r);
                        let after = dual_objective(&g, &t, &m);
                        assert!(after <= before + 1e-9, "order {order} eps {eps}: {before} -> {after}");
                        before = after;
                    }
                }
            }
        }
    }

    #[test]
    fn zero_iterations_leave_messages() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = build_chain_model(3, 3, 1).unwrap();
        let t = random_tables(&g, &mut rng, 1.0);
        let m0 = random_messages(&g, 1.0, &mut rng);
        let mut m = m0.clone();
        message_pass(&g, &t, &mut m, 0);
        assert_eq!(m, m0);
    }

    #[test]
    fn bethe_counting_on_a_single_edge_is_exact() {
        // Bethe counting numbers on a tree are 1 for edges and 1 − deg(i) for
        // variables; for a lone edge both unaries get 0.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let space = VariableSpace::new(vec![3, 4]).unwrap();
        let g = build_chain_with(space, 1, CountingNumbers { unary: 0.0, pairwise: 1.0 }).unwrap();
        for &eps in &[1.0, 0.5] {
            let t = random_tables(&g, &mut rng, 2.0);
            let mut m = MessageSet::zeros(&g, eps);
            let rep = run_to_convergence(&g, &t, &mut m, Convergence::default());
            assert!(rep.converged);
            let exact = oracle::brute_force_log_partition(&g, &t, eps).unwrap();
            assert!((rep.dual - exact).abs() < 1e-8);
            let b = beliefs_from_messages(&g, &t, &m);
            let pb = oracle::brute_force_marginals(&g, &t, eps).unwrap();
            // The pairwise belief carries the joint; unaries are hard at ε·c = 0.
            for (a, c) in b.region(2).iter().zip(pb.region(2)) {
                assert!((a - c).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn unit_counting_numbers_overcount_entropy_on_chains() {
        // With c_r = 1 on every region the fractional entropy double counts
        // the variables, so the converged dual is a strict upper bound.
        let g = build_chain_model(2, 3, 1).unwrap();
        let t = PotentialTables::zeros(&g);
        let mut m = MessageSet::zeros(&g, 1.0);
        let rep = run_to_convergence(&g, &t, &mut m, Convergence::default());
        assert!((rep.dual - 4.0 * 3f64.ln()).abs() < 1e-12);
        let exact = oracle::brute_force_log_partition(&g, &t, 1.0).unwrap();
        assert!((exact - 2.0 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn converged_dual_is_an_upper_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for order in [1, 2] {
            let g = build_chain_model(4, 3, order).unwrap();
            for _ in 0..10 {
                let t = random_tables(&g, &mut rng, 2.0);
                let mut m = MessageSet::zeros(&g, 1.0);
                let rep = run_to_convergence(&g, &t, &mut m, Convergence::default());
                let exact = oracle::brute_force_log_partition(&g, &t, 1.0).unwrap();
                assert!(rep.dual >= exact - 1e-9);
            }
        }
    }

    #[test]
    fn converged_beliefs_are_locally_consistent_with_zero_duality_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = build_chain_model(5, 3, 2).unwrap();
        let t = random_tables(&g, &mut rng, 2.0);
        let mut m = MessageSet::zeros(&g, 1.0);
        let rep = run_to_convergence(&g, &t, &mut m, Convergence::default());
        let b = beliefs_from_messages(&g, &t, &m);
        assert!(b.max_consistency_gap(&g) < 1e-6);
        let primal = oracle::local_polytope_objective(&g, &t, &b, 1.0);
        assert!((primal - rep.dual).abs() < 1e-6, "{primal} vs {}", rep.dual);
    }

    #[test]
    fn zero_temperature_is_tight_on_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let g = build_chain_model(5, 6, 1).unwrap();
        for _ in 0..20 {
            let t = random_tables(&g, &mut rng, 2.0);
            let mut m = MessageSet::zeros(&g, 0.0);
            let rep = run_to_convergence(&g, &t, &mut m, Convergence::default());
            let max = oracle::brute_force_log_partition(&g, &t, 0.0).unwrap();
            assert!((rep.dual - max).abs() < 1e-8, "{} vs {max} after {} sweeps", rep.dual, rep.sweeps);
        }
    }

    #[test]
    fn dual_examples() {
        let g = single(2, 1.0);
        let t = PotentialTables::from_tables(&g, vec![vec![0.0, 0.0]]).unwrap();
        assert!((dual_objective(&g, &t, &MessageSet::zeros(&g, 1.0)) - 2f64.ln()).abs() < 1e-15);
        let t = PotentialTables::from_tables(&g, vec![vec![0.4, -1.5]]).unwrap();
        assert_eq!(dual_objective(&g, &t, &MessageSet::zeros(&g, 0.0)), 0.4);
    }

    #[test]
    fn belief_examples() {
        let g = build_chain_model(3, 2, 1).unwrap();
        let b = beliefs_from_messages(&g, &PotentialTables::zeros(&g), &MessageSet::zeros(&g, 1.0));
        for r in 0..g.len() {
            let n = b.region(r).len() as f64;
            assert!(b.region(r).iter().all(|&v| (v - 1.0 / n).abs() < 1e-15));
        }
        let g = single(2, 1.0);
        let t = PotentialTables::from_tables(&g, vec![vec![3f64.ln(), 0.0]]).unwrap();
        let b = beliefs_from_messages(&g, &t, &MessageSet::zeros(&g, 1.0));
        assert!((b.region(0)[0] - 0.75).abs() < 1e-15);
        assert!((b.region(0)[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn decode_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let g = build_chain_model(3, 4, 1).unwrap();
        let mut t = random_tables(&g, &mut rng, 1.0);
        for r in 3..5 {
            t.region_mut(r).iter_mut().for_each(|v| *v = 0.0);
        }
        let y = map_decode(&g, &t, &MessageSet::zeros(&g, 1.0));
        for (v, &label) in y.iter().enumerate() {
            assert_eq!(label, argmax(t.region(v)));
        }
        let y = map_decode(&g, &PotentialTables::zeros(&g), &MessageSet::zeros(&g, 1.0));
        assert_eq!(y, vec![0, 0, 0]);
    }

    #[test]
    fn decode_dominant_diagonal_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = build_chain_model(3, 2, 1).unwrap();
        for _ in 0..20 {
            let mut t = random_tables(&g, &mut rng, 1.0);
            for r in 3..5 {
                t.region_mut(r)[0] += 4.0;
                t.region_mut(r)[3] += 4.0;
            }
            let best = oracle::brute_force_map(&g, &t).unwrap();
            for eps in [0.0, 0.01] {
                let mut m = MessageSet::zeros(&g, eps);
                run_to_convergence(&g, &t, &mut m, Convergence::default());
                assert_eq!(map_decode(&g, &t, &m), best, "eps {eps}");
            }
        }
    }

    #[test]
    fn reparameterization_telescopes() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let g = build_chain_model(5, 3, 2).unwrap();
        let t = random_tables(&g, &mut rng, 1.0);
        let m = random_messages(&g, 1.0, &mut rng);
        for _ in 0..20 {
            let y: Vec<usize> = (0..5).map(|_| rng.gen_range(0..3)).collect();
            let direct = score_configuration(&g, &t, &y).unwrap();
            let rep: f64 = (0..g.len())
                .map(|r| reparameterized(&g, &t, &m, r)[g.local_index(r, &y)])
                .sum();
            assert!((direct - rep).abs() < 1e-12);
        }
    }
}
