//! Flooding with recorded paths. A triple is accepted once more than `f`
//! copies arrived over pairwise internally-disjoint routes.

mod disjoint;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::graph::{NodeId, Topology};
use crate::rbcast::ProtocolMessage;
use crate::seed::derive_seed;
use crate::simnet::Payload;

pub use disjoint::{greedy_family, has_disjoint, max_disjoint_family};

/// Upper bound on node ids the protocol stack handles; paths pack into a u64.
pub const MAX_PROTOCOL_NODES: usize = 16;
const PATH_CAP: usize = MAX_PROTOCOL_NODES - 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Initial,
    Echo,
    Ready,
}

impl Label {
    pub fn name(self) -> &'static str {
        match self {
            Label::Initial => "initial",
            Label::Echo => "echo",
            Label::Ready => "ready",
        }
    }
}

/// Loop-free node sequence, head = claimed source.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FloodPath {
    len: u8,
    nodes: [u8; PATH_CAP],
}

impl FloodPath {
    pub fn empty() -> Self {
        FloodPath::default()
    }

    /// `None` when longer than the packable limit or an id is out of range.
    pub fn from_nodes(nodes: &[NodeId]) -> Option<Self> {
        if nodes.len() > PATH_CAP {
            return None;
        }
        let mut p = FloodPath::default();
        for &u in nodes {
            if u.index() >= MAX_PROTOCOL_NODES {
                return None;
            }
            p.nodes[p.len as usize] = u.0 as u8;
            p.len += 1;
        }
        Some(p)
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes[..self.len()].iter().map(|&b| NodeId(b as u32))
    }

    pub fn to_vec(&self) -> Vec<NodeId> {
        self.nodes().collect()
    }

    pub fn head(&self) -> Option<NodeId> {
        (self.len > 0).then(|| NodeId(self.nodes[0] as u32))
    }

    pub fn last(&self) -> Option<NodeId> {
        (self.len > 0).then(|| NodeId(self.nodes[self.len() - 1] as u32))
    }

    pub fn contains(&self, u: NodeId) -> bool {
        self.nodes[..self.len()].iter().any(|&b| b as u32 == u.0)
    }

    pub fn appended(&self, u: NodeId) -> Option<Self> {
        if self.len() == PATH_CAP || u.index() >= MAX_PROTOCOL_NODES {
            return None;
        }
        let mut p = *self;
        p.nodes[p.len()] = u.0 as u8;
        p.len += 1;
        Some(p)
    }

    /// Nibble-packed identity: four bits per node plus the length on top.
    pub fn pack(&self) -> u64 {
        let mut k = (self.len as u64) << 60;
        for (i, &b) in self.nodes[..self.len()].iter().enumerate() {
            k |= (b as u64) << (4 * i);
        }
        k
    }

    /// Bitmask of every node but the head.
    pub fn internal_mask(&self) -> u16 {
        self.nodes[1.min(self.len())..self.len()]
            .iter()
            .fold(0, |m, &b| m | 1 << b)
    }
}

impl fmt::Debug for FloodPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.nodes()).finish()
    }
}

/// What a node accepts: payload, asserted origin, label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub payload: ProtocolMessage,
    pub claimed_from: NodeId,
    pub label: Label,
}

impl Triple {
    pub fn digest(&self) -> u64 {
        let m = self.payload;
        let word = (m.source.0 as u64) << 48
            | (m.round as u64) << 8
            | (m.value.index() as u64) << 4
            | self.label as u64;
        derive_seed(derive_seed(word, self.claimed_from.0 as u64), 0x7472)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FloodEnvelope {
    pub payload: ProtocolMessage,
    pub claimed_from: NodeId,
    pub label: Label,
    pub path: FloodPath,
}

impl FloodEnvelope {
    pub fn triple(&self) -> Triple {
        Triple {
            payload: self.payload,
            claimed_from: self.claimed_from,
            label: self.label,
        }
    }

    pub fn with_triple(t: Triple, path: FloodPath) -> Self {
        FloodEnvelope {
            payload: t.payload,
            claimed_from: t.claimed_from,
            label: t.label,
            path,
        }
    }
}

impl Payload for FloodEnvelope {
    fn digest(&self) -> u64 {
        derive_seed(self.triple().digest(), self.path.pack())
    }

    fn label(&self) -> &'static str {
        self.label.name()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    #[default]
    Exact,
    /// Sound but incomplete first-fit.
    Greedy,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PurifyConfig {
    pub f: usize,
    /// Stored routes per triple; `None` means `10 * n^2`.
    #[serde(default)]
    pub store_cap: Option<usize>,
    #[serde(default)]
    pub search: SearchMode,
    /// Also forward to neighbours already on the path (they discard it).
    #[serde(default)]
    pub forward_to_path_members: bool,
}

impl PurifyConfig {
    pub fn new(f: usize) -> Self {
        PurifyConfig {
            f,
            store_cap: None,
            search: SearchMode::Exact,
            forward_to_path_members: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Discard {
    Loop,
    InvalidPath,
    Duplicate,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PurifyMetrics {
    pub received: u64,
    pub stored: u64,
    pub discarded_loop: u64,
    pub discarded_invalid: u64,
    pub discarded_duplicate: u64,
    pub forwarded: u64,
    pub accepted: u64,
    pub searches: u64,
    pub cap_hits: u64,
}

#[derive(Clone, Debug, Default)]
struct TripleMemory {
    seen: HashSet<u64>,
    masks: Vec<u16>,
    stored: usize,
    accepted: bool,
}

/// Per-node purify state: `Mem` is kept as the set of received routes per
/// triple, `Acpt` as the accepted flags.
#[derive(Clone, Debug)]
pub struct Purifier {
    me: NodeId,
    topo: Arc<Topology>,
    f: usize,
    cap: usize,
    search: SearchMode,
    to_members: bool,
    mem: HashMap<Triple, TripleMemory>,
    metrics: PurifyMetrics,
}

/// Result of handling one envelope.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Received {
    Discarded(Discard),
    Relayed { accepted: Option<Triple> },
}

impl Purifier {
    pub fn new(me: NodeId, topo: Arc<Topology>, cfg: &PurifyConfig) -> Self {
        let n = topo.n();
        Purifier {
            me,
            f: cfg.f,
            cap: cfg.store_cap.unwrap_or(10 * n * n),
            search: cfg.search,
            to_members: cfg.forward_to_path_members,
            topo,
            mem: HashMap::new(),
            metrics: PurifyMetrics::default(),
        }
    }

    pub fn me(&self) -> NodeId {
        self.me
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topo
    }

    pub fn metrics(&self) -> &PurifyMetrics {
        &self.metrics
    }

    pub fn is_accepted(&self, t: &Triple) -> bool {
        self.mem.get(t).is_some_and(|m| m.accepted)
    }

    /// Floods `t` with an empty path and accepts it locally.
    pub fn send(&mut self, t: Triple, out: &mut Vec<(NodeId, FloodEnvelope)>) -> Option<Triple> {
        let env = FloodEnvelope::with_triple(t, FloodPath::empty());
        for &v in self.topo.neighbors(self.me) {
            out.push((v, env));
        }
        let mem = self.mem.entry(t).or_default();
        if mem.accepted {
            return None;
        }
        mem.accepted = true;
        self.metrics.accepted += 1;
        Some(t)
    }

    /// Envelope `env` arrived from neighbour `t`.
    pub fn transmit(
        &mut self,
        env: &FloodEnvelope,
        t: NodeId,
        out: &mut Vec<(NodeId, FloodEnvelope)>,
    ) -> Received {
        self.metrics.received += 1;
        if env.path.contains(self.me) || t == self.me {
            self.metrics.discarded_loop += 1;
            return Received::Discarded(Discard::Loop);
        }
        let Some(path) = self.extend_valid(env, t) else {
            self.metrics.discarded_invalid += 1;
            return Received::Discarded(Discard::InvalidPath);
        };
        let triple = env.triple();
        let mem = self.mem.entry(triple).or_default();
        if !mem.seen.insert(path.pack()) {
            self.metrics.discarded_duplicate += 1;
            return Received::Discarded(Discard::Duplicate);
        }
        let mut accepted = None;
        if !mem.accepted {
            if mem.stored < self.cap {
                mem.stored += 1;
                self.metrics.stored += 1;
                let mask = path.internal_mask();
                if !mem.masks.contains(&mask) {
                    self.metrics.searches += 1;
                    let hit = match self.search {
                        SearchMode::Exact => has_disjoint(&mem.masks, self.f, mask),
                        SearchMode::Greedy => {
                            mem.masks.push(mask);
                            let hit = greedy_family(&mem.masks) > self.f;
                            mem.masks.pop();
                            hit
                        }
                    };
                    mem.masks.push(mask);
                    if hit {
                        mem.accepted = true;
                        mem.masks = Vec::new();
                        self.metrics.accepted += 1;
                        accepted = Some(triple);
                    }
                }
            } else {
                self.metrics.cap_hits += 1;
            }
        }
        let fwd = FloodEnvelope { path, ..*env };
        for &v in self.topo.neighbors(self.me) {
            if v == t || (!self.to_members && path.contains(v)) {
                continue;
            }
            out.push((v, fwd));
            self.metrics.forwarded += 1;
        }
        Received::Relayed { accepted }
    }

    /// `env.path + t` if it is a loop-free edge chain headed by the claimed source.
    fn extend_valid(&self, env: &FloodEnvelope, t: NodeId) -> Option<FloodPath> {
        let path = env.path.appended(t)?;
        if path.head() != Some(env.claimed_from) || !self.topo.has_edge(t, self.me) {
            return None;
        }
        let mut seen = 0u32;
        let mut prev: Option<NodeId> = None;
        for u in path.nodes() {
            if u.index() >= self.topo.n() || seen & (1 << u.index()) != 0 {
                return None;
            }
            seen |= 1 << u.index();
            if let Some(p) = prev {
                if !self.topo.has_edge(p, u) {
                    return None;
                }
            }
            prev = Some(u);
        }
        Some(path)
    }

    /// Exact re-check of `t` from scratch; used by audits. Stored routes are
    /// released on acceptance, so accepted triples report `true` directly.
    pub fn accept_check(&self, t: &Triple) -> bool {
        match self.mem.get(t) {
            None => false,
            Some(m) if m.accepted => true,
            Some(m) => max_disjoint_family(&m.masks) > self.f,
        }
    }

    /// Most routes stored for any one triple.
    pub fn storage_peak(&self) -> usize {
        self.mem.values().map(|m| m.stored).max().unwrap_or(0)
    }
}
