//! Brute-force oracles and shared fixtures for the integration tests.
#![allow(dead_code)]

use asyncba::adversary::Strategy;
use asyncba::graph::{gen_topology, GenSpec, NodeId, Path, Topology};
use asyncba::harness::TopologySource;
use asyncba::simnet::{FairnessBound, Priority, SchedulerPolicy};

/// Smallest vertex set whose removal disconnects `g` or leaves one node.
pub fn brute_connectivity(g: &Topology) -> usize {
    let n = g.n();
    if n <= 1 {
        return 0;
    }
    let mut best = n - 1;
    for mask in 0u32..(1 << n) {
        let k = mask.count_ones() as usize;
        if k >= best || n - k < 2 {
            continue;
        }
        let removed: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        if !connected_without(g, &removed) {
            best = k;
        }
    }
    best
}

fn connected_without(g: &Topology, removed: &[bool]) -> bool {
    let n = g.n();
    let Some(start) = (0..n).find(|&i| !removed[i]) else {
        return true;
    };
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(x) = stack.pop() {
        for &y in g.neighbors(NodeId::from(x)) {
            if !removed[y.index()] && !seen[y.index()] {
                seen[y.index()] = true;
                stack.push(y.index());
            }
        }
    }
    (0..n).all(|i| removed[i] || seen[i])
}

/// Every simple `u`-`v` path.
pub fn simple_paths(g: &Topology, u: NodeId, v: NodeId) -> Vec<Vec<NodeId>> {
    fn walk(g: &Topology, v: NodeId, cur: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
        let x = *cur.last().unwrap();
        if x == v {
            out.push(cur.clone());
            return;
        }
        for &y in g.neighbors(x) {
            if !cur.contains(&y) {
                cur.push(y);
                walk(g, v, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(g, v, &mut vec![u], &mut out);
    out
}

/// Largest family of pairwise internally disjoint `u`-`v` paths, by exhaustive search.
pub fn brute_disjoint_paths(g: &Topology, u: NodeId, v: NodeId) -> usize {
    let masks: Vec<u32> = simple_paths(g, u, v)
        .iter()
        .map(|p| p[1..p.len() - 1].iter().fold(0u32, |m, x| m | 1 << x.index()))
        .collect();
    fn best(masks: &[u32], used: u32) -> usize {
        match masks.split_first() {
            None => 0,
            Some((&m, rest)) => {
                let skip = best(rest, used);
                // the direct edge has an empty mask and can be taken only once, which the
                // path list guarantees since it appears once
                if m & used == 0 {
                    skip.max(1 + best(rest, used | m))
                } else {
                    skip
                }
            }
        }
    }
    best(&masks, 0)
}

pub fn paths_disjoint(paths: &[Path]) -> bool {
    for (i, a) in paths.iter().enumerate() {
        for b in &paths[i + 1..] {
            if a.internal().iter().any(|x| b.internal().contains(x)) {
                return false;
            }
        }
    }
    true
}

pub fn id(i: u32) -> NodeId {
    NodeId(i)
}

pub struct Fixture {
    pub name: &'static str,
    pub g: Topology,
    pub f: usize,
}

impl Fixture {
    pub fn source(&self) -> TopologySource {
        TopologySource::Edges {
            n: self.g.n(),
            edges: self.g.edges().iter().map(|&(a, b)| (a.0, b.0)).collect(),
        }
    }

    /// Every Byzantine set of size exactly `f`.
    pub fn byzantine_sets(&self) -> Vec<Vec<NodeId>> {
        let n = self.g.n();
        (0u32..1 << n)
            .filter(|m| m.count_ones() as usize == self.f)
            .map(|m| (0..n as u32).filter(|i| m >> i & 1 == 1).map(NodeId).collect())
            .collect()
    }
}

/// `(2f + 1)`-connected graphs on 4 to 7 nodes.
pub fn fixtures() -> Vec<Fixture> {
    let gen = |spec: GenSpec, seed| gen_topology(&spec, seed).unwrap();
    vec![
        Fixture {
            name: "K4",
            g: Topology::complete(4),
            f: 1,
        },
        Fixture {
            name: "W5",
            g: gen(GenSpec::Wheel { n: 5 }, 0),
            f: 1,
        },
        Fixture {
            name: "W6",
            g: gen(GenSpec::Wheel { n: 6 }, 0),
            f: 1,
        },
        Fixture {
            name: "R7k3",
            g: gen(GenSpec::RandomKConnected { n: 7, k: 3 }, 11),
            f: 1,
        },
        Fixture {
            name: "R7k5",
            g: gen(GenSpec::RandomKConnected { n: 7, k: 5 }, 11),
            f: 2,
        },
    ]
}

pub fn schedulers() -> Vec<SchedulerPolicy> {
    vec![
        SchedulerPolicy::Fifo,
        SchedulerPolicy::Random { seed: None },
        SchedulerPolicy::Adversarial {
            bound: FairnessBound::default(),
            priority: Priority::NewestFirst,
        },
    ]
}

pub fn relay_attacks() -> Vec<Strategy> {
    vec![Strategy::DropRelay, Strategy::CorruptRelay, Strategy::ForgeSource]
}
