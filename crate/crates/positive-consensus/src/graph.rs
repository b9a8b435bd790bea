//! Communication graphs and switching schedules.
//!
//! Node 0 is always the leader; nodes `1..=n` are followers. Edges are
//! directed `(from, to)` pairs with unit weight, and the leader never has
//! incoming edges. The admissibility check requires, per graph, that the
//! follower-to-follower part is undirected and connected and that every
//! follower is reachable from the leader (a spanning tree rooted at node 0).

use std::collections::BTreeSet;

use thiserror::Error;

use crate::linalg::{symmetric_eigen_range, DenseMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("node {node} out of range: graph has followers 1..={max}")]
    NodeOutOfRange { node: usize, max: usize },
    #[error("self loop on node {0}")]
    SelfLoop(usize),
    #[error("edge ({from}, 0) points into the leader; the leader receives no information")]
    LeaderInboundEdge { from: usize },
    #[error("graph must have at least one follower")]
    NoFollowers,
    #[error("schedule needs a non-empty graph family")]
    EmptyFamily,
    #[error("graphs in a family must share the follower count: graph 1 has {first}, graph {index} has {found}")]
    MixedFollowerCounts {
        index: usize,
        first: usize,
        found: usize,
    },
    #[error("schedule refers to graph {index} but the family has {family_size} graphs")]
    BadGraphIndex { index: usize, family_size: usize },
    #[error("periodic schedule needs a block length of at least 1")]
    ZeroBlock,
    #[error("explicit schedule needs a non-empty index list")]
    EmptyIndexList,
    #[error("graph {index} fails the connectivity assumption: {violation}")]
    AssumptionFailed {
        index: usize,
        violation: AssumptionViolation,
    },
}

/// Why a graph fails the connectivity assumption.
#[derive(Debug, Error, PartialEq)]
pub enum AssumptionViolation {
    #[error("follower subgraph is not undirected: edge ({a}, {b}) has no reverse")]
    FollowerEdgeAsymmetric { a: usize, b: usize },
    #[error("follower subgraph is disconnected: node {node} unreachable from node {start}")]
    FollowerSubgraphDisconnected { start: usize, node: usize },
    #[error("no spanning tree rooted at the leader: follower {node} unreachable from node 0")]
    FollowerUnreachableFromLeader { node: usize },
}

/// Directed graph over one leader (node 0) and `n_followers` followers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n_followers: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Digraph {
    /// Builds a graph from `(from, to)` pairs; duplicates collapse.
    pub fn new(
        n_followers: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        if n_followers == 0 {
            return Err(GraphError::NoFollowers);
        }
        let mut set = BTreeSet::new();
        for (from, to) in edges {
            if from > n_followers {
                return Err(GraphError::NodeOutOfRange {
                    node: from,
                    max: n_followers,
                });
            }
            if to > n_followers {
                return Err(GraphError::NodeOutOfRange {
                    node: to,
                    max: n_followers,
                });
            }
            if from == to {
                return Err(GraphError::SelfLoop(from));
            }
            if to == 0 {
                return Err(GraphError::LeaderInboundEdge { from });
            }
            set.insert((from, to));
        }
        Ok(Self {
            n_followers,
            edges: set,
        })
    }

    pub fn n_followers(&self) -> usize {
        self.n_followers
    }

    /// Total node count including the leader.
    pub fn n_nodes(&self) -> usize {
        self.n_followers + 1
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    /// Followers that node `i` listens to (excludes the leader).
    pub fn follower_in_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (1..=self.n_followers).filter(move |&j| self.has_edge(j, i))
    }

    pub fn has_leader_edge(&self, i: usize) -> bool {
        self.has_edge(0, i)
    }

    /// Diagonal of `Λ`: 1 for followers with a leader edge, else 0.
    pub fn leader_links(&self) -> Vec<f64> {
        (1..=self.n_followers)
            .map(|i| if self.has_leader_edge(i) { 1.0 } else { 0.0 })
            .collect()
    }

    /// Graph Laplacian over all nodes: `l_ii = Σ_j a_ij`, `l_ij = −a_ij`.
    pub fn laplacian(&self) -> DenseMatrix {
        let n = self.n_nodes();
        let mut l = DenseMatrix::zeros(n, n);
        for &(from, to) in &self.edges {
            l[(to, from)] -= 1.0;
            l[(to, to)] += 1.0;
        }
        l
    }

    /// `H`: the Laplacian with the leader row and column removed.
    pub fn follower_submatrix(&self) -> DenseMatrix {
        let l = self.laplacian();
        l.view((1, 1), (self.n_followers, self.n_followers))
            .into_owned()
    }

    /// Checks the connectivity assumption: undirected connected follower
    /// subgraph plus a spanning tree rooted at the leader.
    pub fn check_assumption(&self) -> Result<(), AssumptionViolation> {
        for &(from, to) in &self.edges {
            if from >= 1 && !self.has_edge(to, from) {
                return Err(AssumptionViolation::FollowerEdgeAsymmetric { a: from, b: to });
            }
        }
        if let Some(node) = self.first_unreached(1, false) {
            return Err(AssumptionViolation::FollowerSubgraphDisconnected { start: 1, node });
        }
        if let Some(node) = self.first_unreached(0, true) {
            return Err(AssumptionViolation::FollowerUnreachableFromLeader { node });
        }
        Ok(())
    }

    /// BFS from `start`; returns the first follower not reached.
    fn first_unreached(&self, start: usize, include_leader: bool) -> Option<usize> {
        let mut seen = vec![false; self.n_nodes()];
        seen[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for v in 1..=self.n_followers {
                if !seen[v] && self.has_edge(u, v) && (include_leader || u >= 1) {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        (1..=self.n_followers).find(|&v| !seen[v])
    }
}

/// How the active graph index evolves with the step counter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SwitchingRule {
    /// Always the same graph (1-based index into the family).
    Constant { index: usize },
    /// Cycle through `order` (1-based indices), holding each for `block` steps.
    PeriodicBlock { block: usize, order: Vec<usize> },
    /// Explicit per-step indices; the last entry holds forever.
    Explicit { list: Vec<usize> },
}

/// A graph family plus a switching rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSchedule {
    family: Vec<Digraph>,
    rule: SwitchingRule,
}

/// Family-wide constants entering the observer gain bound.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GraphConstants {
    /// Largest Laplacian diagonal entry over the family.
    pub delta: f64,
    /// Largest eigenvalue of any `H_p`.
    pub lambda_max: f64,
    /// Smallest eigenvalue of any `H_p`.
    pub lambda_min: f64,
    /// `min(1/Δ, 2/λ̄)`; admissible gains satisfy `0 < μ < mu_max`.
    pub mu_max: f64,
}

impl GraphSchedule {
    pub fn new(family: Vec<Digraph>, rule: SwitchingRule) -> Result<Self, GraphError> {
        if family.is_empty() {
            return Err(GraphError::EmptyFamily);
        }
        let first = family[0].n_followers();
        for (i, g) in family.iter().enumerate() {
            if g.n_followers() != first {
                return Err(GraphError::MixedFollowerCounts {
                    index: i + 1,
                    first,
                    found: g.n_followers(),
                });
            }
        }
        let check_index = |index: usize| {
            if index == 0 || index > family.len() {
                Err(GraphError::BadGraphIndex {
                    index,
                    family_size: family.len(),
                })
            } else {
                Ok(())
            }
        };
        match &rule {
            SwitchingRule::Constant { index } => check_index(*index)?,
            SwitchingRule::PeriodicBlock { block, order } => {
                if *block == 0 {
                    return Err(GraphError::ZeroBlock);
                }
                if order.is_empty() {
                    return Err(GraphError::EmptyIndexList);
                }
                for &i in order {
                    check_index(i)?;
                }
            }
            SwitchingRule::Explicit { list } => {
                if list.is_empty() {
                    return Err(GraphError::EmptyIndexList);
                }
                for &i in list {
                    check_index(i)?;
                }
            }
        }
        Ok(Self { family, rule })
    }

    /// Convenience rule: cycle through the whole family in order.
    pub fn periodic(family: Vec<Digraph>, block: usize) -> Result<Self, GraphError> {
        let order = (1..=family.len()).collect();
        Self::new(family, SwitchingRule::PeriodicBlock { block, order })
    }

    pub fn family(&self) -> &[Digraph] {
        &self.family
    }

    pub fn rule(&self) -> &SwitchingRule {
        &self.rule
    }

    pub fn n_followers(&self) -> usize {
        self.family[0].n_followers()
    }

    /// Active graph index `σ(k)` (1-based).
    pub fn sigma(&self, k: usize) -> usize {
        match &self.rule {
            SwitchingRule::Constant { index } => *index,
            SwitchingRule::PeriodicBlock { block, order } => order[(k / block) % order.len()],
            SwitchingRule::Explicit { list } => list[k.min(list.len() - 1)],
        }
    }

    pub fn graph_at(&self, k: usize) -> &Digraph {
        &self.family[self.sigma(k) - 1]
    }

    /// Computes the family constants, first checking every graph's
    /// connectivity assumption (the failure names the offending graph).
    pub fn constants(&self) -> Result<GraphConstants, GraphError> {
        let mut delta: f64 = 0.0;
        let mut lambda_max = f64::NEG_INFINITY;
        let mut lambda_min = f64::INFINITY;
        for (i, g) in self.family.iter().enumerate() {
            g.check_assumption()
                .map_err(|violation| GraphError::AssumptionFailed {
                    index: i + 1,
                    violation,
                })?;
            let l = g.laplacian();
            delta = (0..l.nrows()).map(|j| l[(j, j)]).fold(delta, f64::max);
            let (lo, hi) = symmetric_eigen_range(&g.follower_submatrix())
                .expect("follower submatrix is square and non-empty");
            lambda_min = lambda_min.min(lo);
            lambda_max = lambda_max.max(hi);
        }
        Ok(GraphConstants {
            delta,
            lambda_max,
            lambda_min,
            mu_max: (1.0 / delta).min(2.0 / lambda_max),
        })
    }
}

/// Strict admissibility of an observer coupling gain: `0 < μ < mu_max`.
pub fn validate_mu(mu: f64, constants: &GraphConstants) -> bool {
    mu > 0.0 && mu < constants.mu_max
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::Digraph;

    /// First switching topology of the bundled example: leader pins node 2,
    /// follower chain 1–2–3.
    pub fn g1() -> Digraph {
        Digraph::new(3, [(0, 2), (1, 2), (2, 1), (2, 3), (3, 2)]).unwrap()
    }

    /// Second topology: leader pins node 3, follower triangle 1–2–3.
    pub fn g2() -> Digraph {
        Digraph::new(3, [(0, 3), (1, 2), (2, 1), (2, 3), (3, 2), (1, 3), (3, 1)]).unwrap()
    }

    /// Random graph over `n` followers that satisfies the connectivity
    /// assumption: a random follower spanning tree symmetrized, a few extra
    /// symmetric edges, and at least one leader link.
    pub fn admissible_graph(n: usize, seed: &[u8]) -> Digraph {
        let mut edges = Vec::new();
        for v in 2..=n {
            let u = 1 + (seed[v % seed.len()] as usize) % (v - 1);
            edges.push((u, v));
            edges.push((v, u));
        }
        for (i, &s) in seed.iter().enumerate().take(4) {
            let a = 1 + (s as usize) % n;
            let b = 1 + (i * 7 + 3) % n;
            if a != b {
                edges.push((a, b));
                edges.push((b, a));
            }
        }
        let pinned = 1 + (seed[0] as usize) % n;
        edges.push((0, pinned));
        Digraph::new(n, edges).unwrap()
    }
}
