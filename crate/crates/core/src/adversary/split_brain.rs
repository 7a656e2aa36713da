use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use crate::graph::{CopyIndex, CoverMap, CutPartition, GraphError, NodeId, Side, Topology};
use crate::node::{HonestNode, NodeParams, Outgoing};
use crate::purify::{FloodEnvelope, PurifyConfig};
use crate::rbcast::Value;
use crate::seed::derive_seed;
use crate::simnet::Payload;

/// One delivery of the combined run, in double-cover ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompositeRecord {
    pub sender: NodeId,
    pub receiver: NodeId,
    pub payload_hash: u64,
}

/// The cut nodes `R` acting together. Real `X` nodes play `X_0`, real `Y`
/// and `T` play `Y_1` and `T_1`; this coalition runs honest instances of the
/// remaining cover nodes `X_1, Y_0, T_0, R_0, R_1` and lets them talk over
/// an internal FIFO queue.
#[derive(Clone, Debug)]
pub struct SplitBrain {
    map: CoverMap,
    sims: BTreeMap<NodeId, HonestNode>,
    queue: VecDeque<(NodeId, NodeId, FloodEnvelope)>,
    composite: Vec<CompositeRecord>,
    scratch: Vec<Outgoing>,
    internal: u64,
}

/// Cover id played by a real honest node of G.
pub fn real_cover_id(map: &CoverMap, u: NodeId) -> NodeId {
    match map.partition().side(u) {
        Some(Side::X) => map.lift(u, CopyIndex::Zero),
        _ => map.lift(u, CopyIndex::One),
    }
}

/// Inputs on the cover follow the copy index.
pub fn copy_input(copy: CopyIndex) -> Value {
    match copy {
        CopyIndex::Zero => Value::Zero,
        CopyIndex::One => Value::One,
    }
}

/// Coin seed of the instance playing cover node `h`.
pub fn cover_coin_seed(seed: u64, h: NodeId) -> u64 {
    derive_seed(seed, 0x636f_696e_0000 | h.0 as u64)
}

impl SplitBrain {
    pub fn new(
        g: Arc<Topology>,
        part: CutPartition,
        f: usize,
        purify: &PurifyConfig,
        seed: u64,
    ) -> Result<Self, GraphError> {
        part.validate(&g, Some(f))?;
        let map = CoverMap::new(g.n(), part);
        let mut sims = BTreeMap::new();
        for u in g.nodes() {
            let copies: &[CopyIndex] = match map.partition().side(u).expect("validated") {
                Side::X => &[CopyIndex::One],
                Side::Y | Side::T => &[CopyIndex::Zero],
                Side::R => &[CopyIndex::Zero, CopyIndex::One],
            };
            for &c in copies {
                let h = map.lift(u, c);
                sims.insert(
                    h,
                    HonestNode::new(NodeParams {
                        me: u,
                        view: g.clone(),
                        f,
                        purify: purify.clone(),
                        depth: crate::node::StackDepth::Agreement,
                        coin_seed: cover_coin_seed(seed, h),
                    }),
                );
            }
        }
        Ok(SplitBrain {
            map,
            sims,
            queue: VecDeque::new(),
            composite: Vec::new(),
            scratch: Vec::new(),
            internal: 0,
        })
    }

    pub fn map(&self) -> &CoverMap {
        &self.map
    }

    pub fn members(&self) -> Vec<NodeId> {
        self.map.partition().r.iter().copied().collect()
    }

    pub fn simulated(&self) -> impl Iterator<Item = (&NodeId, &HonestNode)> {
        self.sims.iter()
    }

    pub fn composite(&self) -> &[CompositeRecord] {
        &self.composite
    }

    pub fn internal_deliveries(&self) -> u64 {
        self.internal
    }

    /// Records a delivery between real nodes, translated to cover ids.
    pub fn record_real(&mut self, from: NodeId, to: NodeId, env: &FloodEnvelope) {
        let h_to = real_cover_id(&self.map, to);
        let h_from = if self.map.partition().r.contains(&from) {
            self.map.lift_neighbor(h_to, from)
        } else {
            real_cover_id(&self.map, from)
        };
        self.composite.push(CompositeRecord {
            sender: h_from,
            receiver: h_to,
            payload_hash: env.digest(),
        });
    }

    /// Starts every simulated instance; returns real sends as `(from, to, env)`.
    pub fn start(&mut self, now: u64, out: &mut Vec<(NodeId, NodeId, FloodEnvelope)>) {
        let ids: Vec<NodeId> = self.sims.keys().copied().collect();
        for h in ids {
            let (_, copy) = self.map.project(h);
            let mut buf = std::mem::take(&mut self.scratch);
            self.sims.get_mut(&h).expect("sim").start_agreement(copy_input(copy), now, &mut buf);
            self.route(h, &mut buf, out);
            self.scratch = buf;
        }
        self.drain(now, out);
    }

    /// Real node `from` sent `env` to coalition member `to`.
    pub fn deliver(
        &mut self,
        from: NodeId,
        to: NodeId,
        env: &FloodEnvelope,
        now: u64,
        out: &mut Vec<(NodeId, NodeId, FloodEnvelope)>,
    ) {
        let h_from = real_cover_id(&self.map, from);
        let h_to = self.map.lift_neighbor(h_from, to);
        self.composite.push(CompositeRecord {
            sender: h_from,
            receiver: h_to,
            payload_hash: env.digest(),
        });
        self.run_instance(h_from, h_to, env, now, out);
        self.drain(now, out);
    }

    fn run_instance(
        &mut self,
        h_from: NodeId,
        h_to: NodeId,
        env: &FloodEnvelope,
        now: u64,
        out: &mut Vec<(NodeId, NodeId, FloodEnvelope)>,
    ) {
        let mut buf = std::mem::take(&mut self.scratch);
        let (g_from, _) = self.map.project(h_from);
        self.sims
            .get_mut(&h_to)
            .expect("delivery to a simulated node")
            .deliver(g_from, env, now, &mut buf);
        self.route(h_to, &mut buf, out);
        self.scratch = buf;
    }

    fn route(&mut self, h_from: NodeId, buf: &mut Vec<Outgoing>, out: &mut Vec<(NodeId, NodeId, FloodEnvelope)>) {
        let (g_from, _) = self.map.project(h_from);
        for (g_to, env) in buf.drain(..) {
            let h_to = self.map.lift_neighbor(h_from, g_to);
            if self.sims.contains_key(&h_to) {
                self.queue.push_back((h_from, h_to, env));
            } else {
                debug_assert_eq!(real_cover_id(&self.map, g_to), h_to);
                out.push((g_from, g_to, env));
            }
        }
    }

    fn drain(&mut self, now: u64, out: &mut Vec<(NodeId, NodeId, FloodEnvelope)>) {
        while let Some((h_from, h_to, env)) = self.queue.pop_front() {
            self.internal += 1;
            self.composite.push(CompositeRecord {
                sender: h_from,
                receiver: h_to,
                payload_hash: env.digest(),
            });
            self.run_instance(h_from, h_to, &env, now, out);
        }
    }
}
