use super::{CutPartition, GraphError, NodeId, Side, Topology};

/// Copy index of a node of the double cover.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CopyIndex {
    Zero,
    One,
}

impl CopyIndex {
    pub fn index(self) -> usize {
        match self {
            CopyIndex::Zero => 0,
            CopyIndex::One => 1,
        }
    }

    pub fn flipped(self) -> CopyIndex {
        match self {
            CopyIndex::Zero => CopyIndex::One,
            CopyIndex::One => CopyIndex::Zero,
        }
    }
}

/// Node-id bookkeeping between a base graph `G` and its double cover `H`:
/// `u` lifts to `u` (copy 0) and `u + n` (copy 1).
#[derive(Clone, Debug)]
pub struct CoverMap {
    n: usize,
    partition: CutPartition,
}

impl CoverMap {
    pub fn new(base_n: usize, partition: CutPartition) -> Self {
        CoverMap {
            n: base_n,
            partition,
        }
    }

    pub fn base_n(&self) -> usize {
        self.n
    }

    pub fn partition(&self) -> &CutPartition {
        &self.partition
    }

    pub fn lift(&self, u: NodeId, copy: CopyIndex) -> NodeId {
        NodeId::from(u.index() + copy.index() * self.n)
    }

    pub fn project(&self, h: NodeId) -> (NodeId, CopyIndex) {
        if h.index() < self.n {
            (h, CopyIndex::Zero)
        } else {
            (NodeId::from(h.index() - self.n), CopyIndex::One)
        }
    }

    /// Copy index of the neighbour of `(u, copy)` that projects onto `v`.
    pub fn neighbor_copy(&self, u: NodeId, copy: CopyIndex, v: NodeId) -> CopyIndex {
        let crossed = matches!(
            (self.partition.side(u), self.partition.side(v)),
            (Some(Side::X), Some(Side::T)) | (Some(Side::T), Some(Side::X))
        );
        if crossed {
            copy.flipped()
        } else {
            copy
        }
    }

    /// The H-node adjacent to H-node `h` that projects onto base node `v`.
    pub fn lift_neighbor(&self, h: NodeId, v: NodeId) -> NodeId {
        let (u, copy) = self.project(h);
        self.lift(v, self.neighbor_copy(u, copy, v))
    }
}

/// Two copies of every node; edges are duplicated with matching copy index,
/// except X–T edges which join opposite copies.
pub fn build_double_cover(g: &Topology, part: &CutPartition) -> Result<Topology, GraphError> {
    part.validate(g, None)?;
    let map = CoverMap::new(g.n(), part.clone());
    let mut edges = Vec::with_capacity(2 * g.edge_count());
    for &(u, v) in g.edges() {
        for copy in [CopyIndex::Zero, CopyIndex::One] {
            edges.push((map.lift(u, copy), map.lift(v, map.neighbor_copy(u, copy, v))));
        }
    }
    Topology::new(2 * g.n(), edges)
}
