//! Region graphs: variable scopes, parent/child marginalization links and
//! counting numbers.

use std::fmt;

use crate::error::{Error, Result};

pub type RegionId = usize;
pub type EdgeId = usize;

/// Output variables and their label counts. Labels are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableSpace {
    cardinalities: Vec<usize>,
}

impl VariableSpace {
    pub fn new(cardinalities: Vec<usize>) -> Result<Self> {
        if cardinalities.is_empty() {
            return Err(Error::InvalidArgument("at least one variable is required".into()));
        }
        if let Some(i) = cardinalities.iter().position(|&k| k == 0) {
            return Err(Error::InvalidArgument(format!("variable {i} has no labels")));
        }
        Ok(Self { cardinalities })
    }

    pub fn uniform(n: usize, k: usize) -> Result<Self> {
        Self::new(vec![k; n])
    }

    pub fn num_variables(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn cardinality(&self, i: usize) -> usize {
        self.cardinalities[i]
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    /// `Π |Y_i|`, or `None` on overflow.
    pub fn num_configurations(&self) -> Option<u128> {
        self.cardinalities
            .iter()
            .try_fold(1u128, |acc, &k| acc.checked_mul(k as u128))
    }

    pub fn check_assignment(&self, y: &[usize]) -> Result<()> {
        if y.len() != self.cardinalities.len() {
            return Err(Error::InvalidArgument(format!(
                "assignment has {} labels for {} variables",
                y.len(),
                self.cardinalities.len()
            )));
        }
        for (i, (&label, &k)) in y.iter().zip(&self.cardinalities).enumerate() {
            if label >= k {
                return Err(Error::LabelOutOfRange {
                    variable: i,
                    label,
                    cardinality: k,
                });
            }
        }
        Ok(())
    }
}

/// Which part of the potential model feeds a region's table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialBinding {
    /// Output of the shared unary network for this variable's slot.
    Unary { variable: usize },
    /// Table of pairwise edge class `class`.
    Pairwise { class: usize },
    /// Identically zero.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub id: RegionId,
    pub scope: Vec<usize>,
    pub parents: Vec<RegionId>,
    pub children: Vec<RegionId>,
    pub counting_number: f64,
    pub binding: PotentialBinding,
}

/// A child→parent link with the projection from parent to child assignments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub child: RegionId,
    pub parent: RegionId,
    /// For each parent table index, the matching child table index.
    pub projection: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    EmptyScope,
    UnsortedScope,
    VariableOutOfRange(usize),
    UnknownRegion(RegionId),
    NonStrictContainment,
    NotContained,
    ParentChildMismatch,
    NegativeWeightedEntropy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub regions: Vec<RegionId>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match &self.kind {
            ViolationKind::EmptyScope => "empty scope".to_string(),
            ViolationKind::UnsortedScope => "scope not strictly increasing".to_string(),
            ViolationKind::VariableOutOfRange(v) => format!("variable {v} out of range"),
            ViolationKind::UnknownRegion(r) => format!("unknown region {r}"),
            ViolationKind::NonStrictContainment => "non-strict containment".to_string(),
            ViolationKind::NotContained => "child scope not contained in parent".to_string(),
            ViolationKind::ParentChildMismatch => "parent/child lists disagree".to_string(),
            ViolationKind::NegativeWeightedEntropy => "negative weighted entropy".to_string(),
        };
        write!(f, "{what} (regions {:?})", self.regions)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionGraph {
    space: VariableSpace,
    regions: Vec<Region>,
    edges: Vec<Edge>,
    /// Edges in which the region is the child, ordered as `Region::parents`.
    up: Vec<Vec<EdgeId>>,
    /// Edges in which the region is the parent.
    down: Vec<Vec<EdgeId>>,
    sweep_order: Vec<RegionId>,
}

impl RegionGraph {
    /// Assembles a graph from regions whose `parents` lists define the
    /// marginalization links. Children lists are kept as given; call
    /// [`RegionGraph::validate`] before running inference.
    pub fn new(space: VariableSpace, regions: Vec<Region>) -> Self {
        let mut edges = Vec::new();
        let mut up = vec![Vec::new(); regions.len()];
        let mut down = vec![Vec::new(); regions.len()];
        for r in &regions {
            for &p in &r.parents {
                let Some(parent) = regions.get(p) else { continue };
                let Some(projection) = projection(&space, &parent.scope, &r.scope) else {
                    continue;
                };
                let id = edges.len();
                edges.push(Edge {
                    child: r.id,
                    parent: p,
                    projection,
                });
                up[r.id].push(id);
                down[p].push(id);
            }
        }
        let mut sweep_order: Vec<RegionId> = (0..regions.len()).collect();
        sweep_order.sort_by_key(|&r| {
            let s = &regions[r].scope;
            (s.len(), s.first().copied().unwrap_or(usize::MAX), r)
        });
        Self {
            space,
            regions,
            edges,
            up,
            down,
            sweep_order,
        }
    }

    pub fn space(&self) -> &VariableSpace {
        &self.space
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, r: RegionId) -> &Region {
        &self.regions[r]
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e]
    }

    /// Edges `r → p` for `p ∈ P(r)`.
    pub fn parent_edges(&self, r: RegionId) -> &[EdgeId] {
        &self.up[r]
    }

    /// Edges `c → r` for `c ∈ C(r)`.
    pub fn child_edges(&self, r: RegionId) -> &[EdgeId] {
        &self.down[r]
    }

    /// Regions ordered by (scope size, lowest variable).
    pub fn sweep_order(&self) -> &[RegionId] {
        &self.sweep_order
    }

    pub fn table_size(&self, r: RegionId) -> usize {
        self.regions[r]
            .scope
            .iter()
            .map(|&v| self.space.cardinality(v))
            .product()
    }

    /// Index of `y` restricted to region `r` in its row-major table.
    pub fn local_index(&self, r: RegionId, y: &[usize]) -> usize {
        self.regions[r]
            .scope
            .iter()
            .fold(0, |acc, &v| acc * self.space.cardinality(v) + y[v])
    }

    /// Labels of region `r`'s variables for table index `idx`.
    pub fn local_labels(&self, r: RegionId, mut idx: usize) -> Vec<usize> {
        let scope = &self.regions[r].scope;
        let mut out = vec![0; scope.len()];
        for (slot, &v) in out.iter_mut().zip(scope).rev() {
            let k = self.space.cardinality(v);
            *slot = idx % k;
            idx /= k;
        }
        out
    }

    pub fn unary_region(&self, variable: usize) -> Option<RegionId> {
        self.regions
            .iter()
            .find(|r| r.scope.len() == 1 && r.scope[0] == variable)
            .map(|r| r.id)
    }

    pub fn num_pairwise_classes(&self) -> usize {
        self.regions
            .iter()
            .filter_map(|r| match r.binding {
                PotentialBinding::Pairwise { class } => Some(class + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// The same structure with only the unary regions kept.
    pub fn unary_subgraph(&self) -> RegionGraph {
        let regions = self
            .regions
            .iter()
            .filter(|r| r.scope.len() == 1)
            .enumerate()
            .map(|(id, r)| Region {
                id,
                scope: r.scope.clone(),
                parents: vec![],
                children: vec![],
                counting_number: r.counting_number,
                binding: r.binding,
            })
            .collect();
        RegionGraph::new(self.space.clone(), regions)
    }

    /// Whether the pairwise regions form a forest over the variables and no
    /// region spans more than two variables.
    pub fn is_tree(&self) -> bool {
        let n = self.space.num_variables();
        let mut root: Vec<usize> = (0..n).collect();
        fn find(root: &mut [usize], mut a: usize) -> usize {
            while root[a] != a {
                root[a] = root[root[a]];
                a = root[a];
            }
            a
        }
        for r in &self.regions {
            match r.scope.len() {
                0 | 1 => {}
                2 => {
                    let (a, b) = (find(&mut root, r.scope[0]), find(&mut root, r.scope[1]));
                    if a == b {
                        return false;
                    }
                    root[a] = b;
                }
                _ => return false,
            }
        }
        true
    }

    /// Checks every region invariant; `epsilon` is the temperature used to
    /// test `ε·c_r ≥ 0`.
    pub fn validate(&self, epsilon: f64) -> std::result::Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        let n = self.space.num_variables();
        let mut push = |regions: Vec<RegionId>, kind| out.push(Violation { regions, kind });
        for r in &self.regions {
            if r.scope.is_empty() {
                push(vec![r.id], ViolationKind::EmptyScope);
            }
            if r.scope.windows(2).any(|w| w[0] >= w[1]) {
                push(vec![r.id], ViolationKind::UnsortedScope);
            }
            if let Some(&v) = r.scope.iter().find(|&&v| v >= n) {
                push(vec![r.id], ViolationKind::VariableOutOfRange(v));
            }
            if !(epsilon * r.counting_number >= 0.0) {
                push(vec![r.id], ViolationKind::NegativeWeightedEntropy);
            }
            for &p in &r.parents {
                let Some(parent) = self.regions.get(p) else {
                    push(vec![r.id], ViolationKind::UnknownRegion(p));
                    continue;
                };
                if !r.scope.iter().all(|v| parent.scope.contains(v)) {
                    push(vec![r.id, p], ViolationKind::NotContained);
                } else if parent.scope.len() == r.scope.len() {
                    push(vec![r.id, p], ViolationKind::NonStrictContainment);
                }
                if !parent.children.contains(&r.id) {
                    push(vec![r.id, p], ViolationKind::ParentChildMismatch);
                }
            }
            for &c in &r.children {
                match self.regions.get(c) {
                    None => push(vec![r.id], ViolationKind::UnknownRegion(c)),
                    Some(child) if !child.parents.contains(&r.id) => {
                        push(vec![c, r.id], ViolationKind::ParentChildMismatch)
                    }
                    _ => {}
                }
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    /// [`RegionGraph::validate`] as a `Result` with the crate error type.
    pub fn ensure_valid(&self, epsilon: f64) -> Result<()> {
        self.validate(epsilon).map_err(Error::InvalidGraph)
    }
}

fn projection(space: &VariableSpace, parent: &[usize], child: &[usize]) -> Option<Vec<u32>> {
    if parent.iter().chain(child).any(|&v| v >= space.num_variables()) {
        return None;
    }
    let pos: Vec<usize> = child
        .iter()
        .map(|v| parent.iter().position(|p| p == v))
        .collect::<Option<_>>()?;
    let cards: Vec<usize> = parent.iter().map(|&v| space.cardinality(v)).collect();
    let size: usize = cards.iter().product();
    let mut labels = vec![0usize; parent.len()];
    let mut out = Vec::with_capacity(size);
    for _ in 0..size {
        let idx = pos
            .iter()
            .fold(0usize, |acc, &k| acc * cards[k] + labels[k]);
        out.push(idx as u32);
        for k in (0..labels.len()).rev() {
            labels[k] += 1;
            if labels[k] < cards[k] {
                break;
            }
            labels[k] = 0;
        }
    }
    Some(out)
}

/// Counting numbers per region class of a chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountingNumbers {
    pub unary: f64,
    pub pairwise: f64,
}

impl Default for CountingNumbers {
    fn default() -> Self {
        Self {
            unary: 1.0,
            pairwise: 1.0,
        }
    }
}

/// First- or second-order Markov chain with `c_r = 1` everywhere.
pub fn build_chain_model(n: usize, k: usize, order: usize) -> Result<RegionGraph> {
    build_chain_with(VariableSpace::uniform(n, k)?, order, CountingNumbers::default())
}

/// Chain over `space`: unary regions `{i}`, distance-1 pairs (class 0) and,
/// for order 2, distance-2 pairs (class 1). Unaries are children of every
/// pair containing them.
pub fn build_chain_with(
    space: VariableSpace,
    order: usize,
    counting: CountingNumbers,
) -> Result<RegionGraph> {
    let n = space.num_variables();
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidArgument(format!("order must be 1 or 2, got {order}")));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("a chain needs at least 2 variables, got {n}")));
    }
    if order == 2 && n < 3 {
        return Err(Error::InvalidArgument(format!(
            "a second-order chain needs at least 3 variables, got {n}"
        )));
    }
    if let Some(i) = space.cardinalities().iter().position(|&k| k < 2) {
        return Err(Error::InvalidArgument(format!("variable {i} needs at least 2 labels")));
    }
    let mut regions: Vec<Region> = (0..n)
        .map(|i| Region {
            id: i,
            scope: vec![i],
            parents: vec![],
            children: vec![],
            counting_number: counting.unary,
            binding: PotentialBinding::Unary { variable: i },
        })
        .collect();
    for dist in 1..=order {
        for i in 0..n - dist {
            let id = regions.len();
            let (a, b) = (i, i + dist);
            regions.push(Region {
                id,
                scope: vec![a, b],
                parents: vec![],
                children: vec![a, b],
                counting_number: counting.pairwise,
                binding: PotentialBinding::Pairwise { class: dist - 1 },
            });
            regions[a].parents.push(id);
            regions[b].parents.push(id);
        }
    }
    Ok(RegionGraph::new(space, regions))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_order_counts() {
        let g = build_chain_model(5, 26, 1).unwrap();
        assert_eq!(g.regions().iter().filter(|r| r.scope.len() == 1).count(), 5);
        assert_eq!(g.regions().iter().filter(|r| r.scope.len() == 2).count(), 4);
        assert_eq!(g.edges().len(), 8);
        assert!(g.validate(1.0).is_ok());
        assert!(g.is_tree());
    }

    #[test]
    fn second_order_counts() {
        let g = build_chain_model(5, 26, 2).unwrap();
        let pairs: Vec<_> = g.regions().iter().filter(|r| r.scope.len() == 2).collect();
        assert_eq!(pairs.len(), 7);
        assert_eq!(
            pairs
                .iter()
                .filter(|r| r.binding == PotentialBinding::Pairwise { class: 1 })
                .count(),
            3
        );
        assert!(!g.is_tree());
        assert!(g.validate(1.0).is_ok());
    }

    #[test]
    fn two_variable_chain_is_a_tree() {
        let g = build_chain_model(2, 2, 1).unwrap();
        assert_eq!(g.len(), 3);
        assert!(g.is_tree());
    }

    #[test]
    fn order_two_needs_three_variables() {
        assert!(build_chain_model(2, 3, 2).is_err());
        assert!(build_chain_model(3, 3, 3).is_err());
    }

    #[test]
    fn non_strict_containment_is_reported() {
        let space = VariableSpace::uniform(1, 2).unwrap();
        let regions = vec![
            Region {
                id: 0,
                scope: vec![0],
                parents: vec![1],
                children: vec![],
                counting_number: 1.0,
                binding: PotentialBinding::Zero,
            },
            Region {
                id: 1,
                scope: vec![0],
                parents: vec![],
                children: vec![0],
                counting_number: 1.0,
                binding: PotentialBinding::Zero,
            },
        ];
        let v = RegionGraph::new(space, regions).validate(1.0).unwrap_err();
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().contains("non-strict containment"));
        assert_eq!(v[0].regions, vec![0, 1]);
    }

    #[test]
    fn negative_counting_number_is_reported() {
        let mut g = build_chain_model(3, 2, 1).unwrap();
        g.regions[1].counting_number = -1.0;
        let v = g.validate(1.0).unwrap_err();
        assert!(v.iter().any(|x| x.to_string().contains("negative weighted entropy")));
        // ε = 0 makes the product zero.
        assert!(g.validate(0.0).is_ok());
    }

    #[test]
    fn parent_child_mismatch_is_reported() {
        let mut g = build_chain_model(3, 2, 1).unwrap();
        g.regions[3].children.clear();
        let v = g.validate(1.0).unwrap_err();
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|x| x.kind == ViolationKind::ParentChildMismatch));
    }

    #[test]
    fn projection_matches_labels() {
        let space = VariableSpace::new(vec![2, 3, 4]).unwrap();
        let p = projection(&space, &[0, 1, 2], &[0, 2]).unwrap();
        assert_eq!(p.len(), 24);
        // parent labels (1, 2, 3) -> index 1*12 + 2*4 + 3 = 23; child (1, 3) -> 1*4 + 3 = 7
        assert_eq!(p[23], 7);
        assert_eq!(p[5], 1); // (0, 1, 1) -> (0, 1)
    }

    #[test]
    fn local_index_round_trip() {
        let g = build_chain_model(4, 3, 2).unwrap();
        let y = [2, 0, 1, 2];
        for r in 0..g.len() {
            let idx = g.local_index(r, &y);
            let labels = g.local_labels(r, idx);
            let expect: Vec<usize> = g.region(r).scope.iter().map(|&v| y[v]).collect();
            assert_eq!(labels, expect);
        }
    }

    #[test]
    fn sweep_order_is_by_scope_then_variable() {
        let g = build_chain_model(4, 2, 2).unwrap();
        let sizes: Vec<usize> = g.sweep_order().iter().map(|&r| g.region(r).scope.len()).collect();
        assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(&g.sweep_order()[..4], &[0, 1, 2, 3]);
    }

    #[test]
    fn configuration_count_overflow_is_detected() {
        let s = VariableSpace::uniform(40, 26).unwrap();
        assert!(s.num_configurations().is_none());
        assert_eq!(VariableSpace::uniform(5, 26).unwrap().num_configurations(), Some(11_881_376));
    }
}
