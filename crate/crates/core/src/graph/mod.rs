//! Communication topologies: undirected graphs over dense node ids, plus the
//! connectivity machinery the protocol layers rely on.

mod connectivity;
mod cover;
mod generate;
mod io;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use connectivity::{
    are_internally_disjoint, connectivity_witness, local_connectivity, max_disjoint_paths,
    vertex_connectivity,
};
pub use cover::{build_double_cover, CopyIndex, CoverMap};
pub use generate::{gen_topology, GenSpec, MAX_GEN_ATTEMPTS};
pub use io::{parse_graph, read_graph, write_graph};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(NodeId, NodeId),
    #[error("node {node} out of range for a graph with {n} nodes")]
    OutOfRange { node: NodeId, n: usize },
    #[error("endpoints must differ (got {0} twice)")]
    SameEndpoints(NodeId),
    #[error("paths do not share the same endpoints")]
    MismatchedEndpoints,
    #[error("path must contain at least two nodes")]
    DegeneratePath,
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("infeasible generator parameters: {0}")]
    Infeasible(String),
    #[error("generator gave up after {0} attempts")]
    GeneratorExhausted(usize),
    #[error("graph file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}

/// Dense node identifier in `[0, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i as u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Immutable undirected simple graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    edges: Vec<(NodeId, NodeId)>,
    adjacency: Vec<Vec<NodeId>>,
    words: usize,
    bits: Vec<u64>,
}

impl Topology {
    pub fn new<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let words = n.div_ceil(64).max(1);
        let mut bits = vec![0u64; n * words];
        let mut adjacency = vec![Vec::new(); n];
        let mut list = Vec::new();
        for (u, v) in edges {
            for w in [u, v] {
                if w.index() >= n {
                    return Err(GraphError::OutOfRange { node: w, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            let slot = a.index() * words + b.index() / 64;
            let mask = 1u64 << (b.index() % 64);
            if bits[slot] & mask != 0 {
                return Err(GraphError::DuplicateEdge(a, b));
            }
            bits[slot] |= mask;
            bits[b.index() * words + a.index() / 64] |= 1u64 << (a.index() % 64);
            adjacency[a.index()].push(b);
            adjacency[b.index()].push(a);
            list.push((a, b));
        }
        list.sort_unstable();
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Topology {
            n,
            edges: list,
            adjacency,
            words,
            bits,
        })
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (NodeId::from(u), NodeId::from(v))));
        Self::new(n, edges).expect("complete graph is simple")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.n).map(NodeId::from)
    }

    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.adjacency[u.index()]
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.adjacency[u.index()].len()
    }

    #[inline]
    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        if u.index() >= self.n || v.index() >= self.n {
            return false;
        }
        self.bits[u.index() * self.words + v.index() / 64] & (1u64 << (v.index() % 64)) != 0
    }

    pub fn contains(&self, u: NodeId) -> bool {
        u.index() < self.n
    }

    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.n * self.n.saturating_sub(1) / 2
    }

    /// Connectivity of the subgraph induced by nodes not in `removed`.
    pub fn is_connected_without(&self, removed: &[bool]) -> bool {
        let start = match (0..self.n).find(|&i| !removed[i]) {
            Some(s) => s,
            None => return true,
        };
        let mut seen = vec![false; self.n];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 1;
        while let Some(x) = stack.pop() {
            for &y in &self.adjacency[x] {
                let y = y.index();
                if !removed[y] && !seen[y] {
                    seen[y] = true;
                    count += 1;
                    stack.push(y);
                }
            }
        }
        count == removed.iter().filter(|r| !**r).count()
    }

    pub fn is_connected(&self) -> bool {
        self.is_connected_without(&vec![false; self.n])
    }
}

/// Sequence of distinct nodes joined by consecutive edges.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Path(pub Vec<NodeId>);

impl Path {
    pub fn nodes(&self) -> &[NodeId] {
        &self.0
    }

    pub fn endpoints(&self) -> Option<(NodeId, NodeId)> {
        Some((*self.0.first()?, *self.0.last()?))
    }

    pub fn internal(&self) -> &[NodeId] {
        if self.0.len() <= 2 {
            &[]
        } else {
            &self.0[1..self.0.len() - 1]
        }
    }

    /// True when entries are distinct and every consecutive pair is an edge of `g`.
    pub fn is_valid_in(&self, g: &Topology) -> bool {
        let mut seen = BTreeSet::new();
        self.0.iter().all(|&u| g.contains(u) && seen.insert(u))
            && self.0.windows(2).all(|w| g.has_edge(w[0], w[1]))
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|u| u.to_string()).collect();
        write!(f, "{}", parts.join("-"))
    }
}

/// Four-way split `V = X ∪ Y ∪ R ∪ T` where `R ∪ T` separates `X` from `Y`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutPartition {
    pub x: BTreeSet<NodeId>,
    pub y: BTreeSet<NodeId>,
    pub r: BTreeSet<NodeId>,
    pub t: BTreeSet<NodeId>,
}

/// Which side of a [`CutPartition`] a node lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    X,
    Y,
    R,
    T,
}

impl CutPartition {
    /// Partition with ids laid out contiguously in the order X, Y, R, T.
    pub fn contiguous(x: usize, y: usize, r: usize, t: usize) -> Self {
        let range = |lo: usize, len: usize| (lo..lo + len).map(NodeId::from).collect();
        CutPartition {
            x: range(0, x),
            y: range(x, y),
            r: range(x + y, r),
            t: range(x + y + r, t),
        }
    }

    pub fn side(&self, u: NodeId) -> Option<Side> {
        if self.x.contains(&u) {
            Some(Side::X)
        } else if self.y.contains(&u) {
            Some(Side::Y)
        } else if self.r.contains(&u) {
            Some(Side::R)
        } else if self.t.contains(&u) {
            Some(Side::T)
        } else {
            None
        }
    }

    /// Checks the partition against `g`; `f` bounds `|R|` and `|T|` when given.
    pub fn validate(&self, g: &Topology, f: Option<usize>) -> Result<(), GraphError> {
        let bad = |m: &str| Err(GraphError::InvalidPartition(m.to_string()));
        if self.x.is_empty() || self.y.is_empty() || self.r.is_empty() || self.t.is_empty() {
            return bad("all four sets must be non-empty");
        }
        let total = self.x.len() + self.y.len() + self.r.len() + self.t.len();
        let union: BTreeSet<_> = self
            .x
            .iter()
            .chain(&self.y)
            .chain(&self.r)
            .chain(&self.t)
            .copied()
            .collect();
        if union.len() != total {
            return bad("sets overlap");
        }
        if total != g.n() || union.iter().any(|u| !g.contains(*u)) {
            return bad("sets do not cover the node set exactly");
        }
        if let Some(f) = f {
            if self.r.len() > f || self.t.len() > f {
                return bad("|R| and |T| must not exceed f");
            }
        }
        if g
            .edges()
            .iter()
            .any(|&(u, v)| (self.x.contains(&u) && self.y.contains(&v)) || (self.y.contains(&u) && self.x.contains(&v)))
        {
            return bad("X and Y are joined by an edge");
        }
        Ok(())
    }
}
