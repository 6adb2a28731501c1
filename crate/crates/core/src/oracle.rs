//! Exact reference computations by enumerating every configuration.
//!
//! These are deliberately independent of the message-passing code: they only
//! use [`score_configuration`] and plain exponentials.

use crate::error::{Error, Result};
use crate::inference::{BeliefSet, TIE_TOLERANCE};
use crate::math::LogSumExpAcc;
use crate::potentials::{score_configuration, PotentialTables};
use crate::region::RegionGraph;

/// Largest state space the oracles will enumerate.
pub const MAX_CONFIGURATIONS: u128 = 10_000_000;

fn configurations(graph: &RegionGraph) -> Result<Odometer> {
    let limit = MAX_CONFIGURATIONS;
    match graph.space().num_configurations() {
        Some(size) if size <= limit => Ok(Odometer {
            cards: graph.space().cardinalities().to_vec(),
            current: None,
        }),
        Some(size) => Err(Error::StateSpaceTooLarge { size, limit }),
        None => Err(Error::StateSpaceTooLarge { size: u128::MAX, limit }),
    }
}

struct Odometer {
    cards: Vec<usize>,
    current: Option<Vec<usize>>,
}

impl Odometer {
    fn next(&mut self) -> Option<&[usize]> {
        match &mut self.current {
            None => self.current = Some(vec![0; self.cards.len()]),
            Some(y) => {
                let mut i = y.len();
                loop {
                    if i == 0 {
                        return None;
                    }
                    i -= 1;
                    y[i] += 1;
                    if y[i] < self.cards[i] {
                        break;
                    }
                    y[i] = 0;
                }
            }
        }
        self.current.as_deref()
    }
}

/// `ε ln Σ_y exp(F(y)/ε)`; `max_y F(y)` when `ε = 0`.
pub fn brute_force_log_partition(graph: &RegionGraph, tables: &PotentialTables, epsilon: f64) -> Result<f64> {
    let mut it = configurations(graph)?;
    if epsilon == 0.0 {
        let mut best = f64::NEG_INFINITY;
        while let Some(y) = it.next() {
            best = best.max(score_configuration(graph, tables, y)?);
        }
        return Ok(best);
    }
    let mut acc = LogSumExpAcc::default();
    while let Some(y) = it.next() {
        acc.push(score_configuration(graph, tables, y)? / epsilon);
    }
    Ok(epsilon * acc.value())
}

/// Exact region marginals of the annealed soft-max `p(y) ∝ exp(F(y)/ε)`;
/// for `ε = 0` the joint is uniform over the maximizers.
pub fn brute_force_marginals(graph: &RegionGraph, tables: &PotentialTables, epsilon: f64) -> Result<BeliefSet> {
    let log_z = brute_force_log_partition(graph, tables, epsilon)?;
    let mut marg: Vec<Vec<f64>> = (0..graph.len()).map(|r| vec![0.0; graph.table_size(r)]).collect();
    let mut total = 0.0;
    let mut it = configurations(graph)?;
    while let Some(y) = it.next() {
        let f = score_configuration(graph, tables, y)?;
        let w = if epsilon == 0.0 {
            if log_z - f <= TIE_TOLERANCE {
                1.0
            } else {
                0.0
            }
        } else {
            ((f - log_z) / epsilon).exp()
        };
        if w == 0.0 {
            continue;
        }
        total += w;
        for (r, m) in marg.iter_mut().enumerate() {
            m[graph.local_index(r, y)] += w;
        }
    }
    for m in &mut marg {
        m.iter_mut().for_each(|v| *v /= total);
    }
    Ok(BeliefSet::new(marg))
}

/// `argmax_y F(y)`, lowest configuration in lexicographic order on ties.
pub fn brute_force_map(graph: &RegionGraph, tables: &PotentialTables) -> Result<Vec<usize>> {
    let mut it = configurations(graph)?;
    let mut best = f64::NEG_INFINITY;
    let mut arg = Vec::new();
    while let Some(y) = it.next() {
        let f = score_configuration(graph, tables, y)?;
        if f > best {
            best = f;
            arg = y.to_vec();
        }
    }
    Ok(arg)
}

/// Primal value `Σ_r ⟨b_r, f_r⟩ + Σ_r ε c_r H(b_r)` of a belief set.
pub fn local_polytope_objective(graph: &RegionGraph, tables: &PotentialTables, beliefs: &BeliefSet, epsilon: f64) -> f64 {
    (0..graph.len())
        .map(|r| {
            let b = beliefs.region(r);
            let linear: f64 = b.iter().zip(tables.region(r)).map(|(p, f)| p * f).sum();
            let entropy: f64 = b.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum();
            linear + epsilon * graph.region(r).counting_number * entropy
        })
        .sum()
}
