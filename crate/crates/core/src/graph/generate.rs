use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{vertex_connectivity, GraphError, NodeId, Topology};
use crate::seed::derive_seed;

pub const MAX_GEN_ATTEMPTS: usize = 1000;

/// Generator family and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenSpec {
    Complete {
        n: usize,
    },
    Cycle {
        n: usize,
    },
    /// Hub `0` joined to a rim cycle on `1..n`.
    Wheel {
        n: usize,
    },
    RandomKConnected {
        n: usize,
        k: usize,
    },
    /// Ids are laid out as X, then Y, R, T. `intra` is the edge density inside
    /// each set, `inter` the density of the allowed cross edges (everything
    /// except X–Y).
    CutPartition {
        x: usize,
        y: usize,
        r: usize,
        t: usize,
        intra: f64,
        inter: f64,
    },
}

impl GenSpec {
    pub fn node_count(&self) -> usize {
        match *self {
            GenSpec::Complete { n }
            | GenSpec::Cycle { n }
            | GenSpec::Wheel { n }
            | GenSpec::RandomKConnected { n, .. } => n,
            GenSpec::CutPartition { x, y, r, t, .. } => x + y + r + t,
        }
    }
}

fn infeasible<T>(msg: impl Into<String>) -> Result<T, GraphError> {
    Err(GraphError::Infeasible(msg.into()))
}

pub fn gen_topology(spec: &GenSpec, seed: u64) -> Result<Topology, GraphError> {
    match *spec {
        GenSpec::Complete { n } => Ok(Topology::complete(n)),
        GenSpec::Cycle { n } => {
            if n < 3 {
                return infeasible("cycle needs at least 3 nodes");
            }
            Topology::new(n, (0..n).map(|i| (NodeId::from(i), NodeId::from((i + 1) % n))))
        }
        GenSpec::Wheel { n } => {
            if n < 4 {
                return infeasible("wheel needs at least 4 nodes");
            }
            let rim = n - 1;
            let spokes = (1..n).map(|i| (NodeId(0), NodeId::from(i)));
            let ring = (0..rim).map(|i| (NodeId::from(1 + i), NodeId::from(1 + (i + 1) % rim)));
            Topology::new(n, spokes.chain(ring))
        }
        GenSpec::RandomKConnected { n, k } => random_k_connected(n, k, seed),
        GenSpec::CutPartition {
            x,
            y,
            r,
            t,
            intra,
            inter,
        } => cut_partition([x, y, r, t], intra, inter, seed),
    }
}

fn random_k_connected(n: usize, k: usize, seed: u64) -> Result<Topology, GraphError> {
    if k == 0 || k >= n {
        return infeasible(format!("need 0 < k < n, got k={k}, n={n}"));
    }
    let mut pairs: Vec<(NodeId, NodeId)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (NodeId::from(u), NodeId::from(v))))
        .collect();
    for attempt in 0..MAX_GEN_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, attempt as u64));
        pairs.shuffle(&mut rng);
        let mut degree = vec![0usize; n];
        let mut edges = Vec::new();
        for &(u, v) in &pairs {
            edges.push((u, v));
            degree[u.index()] += 1;
            degree[v.index()] += 1;
            if degree.iter().all(|&d| d >= k) {
                let g = Topology::new(n, edges.iter().copied())?;
                if vertex_connectivity(&g) >= k {
                    return Ok(g);
                }
            }
        }
    }
    Err(GraphError::GeneratorExhausted(MAX_GEN_ATTEMPTS))
}

fn cut_partition(sizes: [usize; 4], intra: f64, inter: f64, seed: u64) -> Result<Topology, GraphError> {
    if sizes.contains(&0) {
        return infeasible("all four partition sets must be non-empty");
    }
    for p in [intra, inter] {
        if !(0.0..=1.0).contains(&p) {
            return infeasible(format!("edge density {p} outside [0, 1]"));
        }
    }
    let n: usize = sizes.iter().sum();
    let mut side = Vec::with_capacity(n);
    for (s, &len) in sizes.iter().enumerate() {
        side.extend(std::iter::repeat_n(s, len));
    }
    for attempt in 0..MAX_GEN_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, attempt as u64));
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                let (a, b) = (side[u], side[v]);
                // sides 0 and 1 are X and Y
                if a == 0 && b == 1 {
                    continue;
                }
                let p = if a == b { intra } else { inter };
                if rng.gen_bool(p) {
                    edges.push((NodeId::from(u), NodeId::from(v)));
                }
            }
        }
        let g = Topology::new(n, edges)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(GraphError::GeneratorExhausted(MAX_GEN_ATTEMPTS))
}
