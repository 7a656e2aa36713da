//! Byzantine behaviours. Every strategy other than crash keeps an honest
//! instance running and rewrites what it emits.

pub(crate) mod split_brain;

use std::collections::{HashSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::graph::{NodeId, Topology};
use crate::node::{HonestNode, NodeParams, Outgoing};
use crate::purify::{FloodEnvelope, FloodPath, Label, Triple};
use crate::rbcast::{ProtocolMessage, Value};

pub use split_brain::{copy_input, cover_coin_seed, real_cover_id, CompositeRecord, SplitBrain};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// Silent from the start.
    Crash,
    /// Originates honestly, never relays.
    DropRelay,
    /// Relays with the payload value flipped.
    CorruptRelay,
    /// Honest, plus a flipped copy of every new triple attributed to its honest
    /// claimed source over a fabricated path.
    ForgeSource,
    /// Own broadcasts, and its echoes of them, carry 0 towards `zero_side` neighbours and 1 elsewhere.
    /// Defaults to even ids.
    Equivocate {
        #[serde(default)]
        zero_side: Option<Vec<NodeId>>,
    },
    /// The Byzantine set jointly simulates the missing half of the double cover.
    SplitBrain,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Crash => "crash",
            Strategy::DropRelay => "drop_relay",
            Strategy::CorruptRelay => "corrupt_relay",
            Strategy::ForgeSource => "forge_source",
            Strategy::Equivocate { .. } => "equivocate",
            Strategy::SplitBrain => "split_brain",
        }
    }

    pub fn equivocate() -> Strategy {
        Strategy::Equivocate { zero_side: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversarySpec {
    #[serde(default)]
    pub byzantine: Vec<NodeId>,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    /// Per-node replacements for `strategy`.
    #[serde(default)]
    pub overrides: Vec<Override>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Override {
    pub node: NodeId,
    pub strategy: Strategy,
}

fn default_strategy() -> Strategy {
    Strategy::Crash
}

impl Default for Strategy {
    fn default() -> Self {
        default_strategy()
    }
}

impl AdversarySpec {
    pub fn none() -> Self {
        AdversarySpec::default()
    }

    pub fn uniform(byzantine: Vec<NodeId>, strategy: Strategy) -> Self {
        AdversarySpec {
            byzantine,
            strategy,
            overrides: Vec::new(),
        }
    }

    pub fn strategy_of(&self, u: NodeId) -> Option<&Strategy> {
        if !self.byzantine.contains(&u) {
            return None;
        }
        Some(
            self.overrides
                .iter()
                .find(|o| o.node == u)
                .map_or(&self.strategy, |o| &o.strategy),
        )
    }

    pub fn is_byzantine(&self, u: NodeId) -> bool {
        self.byzantine.contains(&u)
    }
}

fn forged_value(v: Value) -> Value {
    match v {
        Value::Zero => Value::One,
        _ => Value::Zero,
    }
}

/// Shortest path from `from` to `to` in `g`, endpoints included.
fn bfs_path(g: &Topology, from: NodeId, to: NodeId) -> Option<Vec<NodeId>> {
    let mut pred = vec![None; g.n()];
    let mut queue = VecDeque::from([from]);
    pred[from.index()] = Some(from);
    while let Some(x) = queue.pop_front() {
        if x == to {
            let mut path = vec![to];
            let mut cur = to;
            while cur != from {
                cur = pred[cur.index()].expect("visited");
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        for &y in g.neighbors(x) {
            if pred[y.index()].is_none() {
                pred[y.index()] = Some(x);
                queue.push_back(y);
            }
        }
    }
    None
}

/// A single Byzantine node running one of the local strategies.
#[derive(Clone, Debug)]
pub struct ByzantineNode {
    me: NodeId,
    strategy: Strategy,
    view: Arc<Topology>,
    inner: Option<HonestNode>,
    honest: Vec<bool>,
    zero_side: Vec<bool>,
    forged: HashSet<Triple>,
    scratch: Vec<Outgoing>,
    forgeries: u64,
}

impl ByzantineNode {
    /// `honest[u]` tells forgers whom they may impersonate.
    pub fn new(params: NodeParams, strategy: Strategy, honest: Vec<bool>) -> Self {
        assert!(strategy != Strategy::SplitBrain, "split brain is a coalition strategy");
        let n = params.view.n();
        let zero_side = match &strategy {
            Strategy::Equivocate { zero_side: Some(set) } => {
                let mut z = vec![false; n];
                for u in set {
                    if u.index() < n {
                        z[u.index()] = true;
                    }
                }
                z
            }
            _ => (0..n).map(|i| i % 2 == 0).collect(),
        };
        ByzantineNode {
            me: params.me,
            view: params.view.clone(),
            inner: (strategy != Strategy::Crash).then(|| HonestNode::new(params)),
            strategy,
            honest,
            zero_side,
            forged: HashSet::new(),
            scratch: Vec::new(),
            forgeries: 0,
        }
    }

    pub fn me(&self) -> NodeId {
        self.me
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn forgeries(&self) -> u64 {
        self.forgeries
    }

    pub fn inner(&self) -> Option<&HonestNode> {
        self.inner.as_ref()
    }

    pub fn start_agreement(&mut self, input: Value, now: u64, out: &mut Vec<Outgoing>) {
        let mut buf = std::mem::take(&mut self.scratch);
        if let Some(inner) = self.inner.as_mut() {
            inner.start_agreement(input, now, &mut buf);
        }
        self.rewrite(&mut buf, out);
        self.scratch = buf;
    }

    pub fn rb_broadcast(&mut self, m: ProtocolMessage, now: u64, out: &mut Vec<Outgoing>) {
        let mut buf = std::mem::take(&mut self.scratch);
        if let Some(inner) = self.inner.as_mut() {
            let _ = inner.rb_broadcast(m, now, &mut buf);
        }
        self.rewrite(&mut buf, out);
        self.scratch = buf;
    }

    pub fn purify_send(&mut self, m: ProtocolMessage, label: Label, now: u64, out: &mut Vec<Outgoing>) {
        let mut buf = std::mem::take(&mut self.scratch);
        if let Some(inner) = self.inner.as_mut() {
            inner.purify_send(m, label, now, &mut buf);
        }
        self.rewrite(&mut buf, out);
        self.scratch = buf;
    }

    pub fn deliver(&mut self, from: NodeId, env: &FloodEnvelope, now: u64, out: &mut Vec<Outgoing>) {
        let Some(inner) = self.inner.as_mut() else {
            return;
        };
        let mut buf = std::mem::take(&mut self.scratch);
        inner.deliver(from, env, now, &mut buf);
        self.rewrite(&mut buf, out);
        self.scratch = buf;
        if self.strategy == Strategy::ForgeSource {
            self.forge(env, out);
        }
    }

    fn rewrite(&mut self, buf: &mut Vec<Outgoing>, out: &mut Vec<Outgoing>) {
        for (to, mut env) in buf.drain(..) {
            let own = env.path.is_empty();
            match &self.strategy {
                Strategy::DropRelay if !own => continue,
                Strategy::CorruptRelay if !own => env.payload.value = forged_value(env.payload.value),
                Strategy::Equivocate { .. } if own && env.payload.source == self.me => {
                    env.payload.value = if self.zero_side[to.index()] {
                        Value::Zero
                    } else {
                        Value::One
                    };
                }
                _ => {}
            }
            out.push((to, env));
        }
    }

    fn forge(&mut self, env: &FloodEnvelope, out: &mut Vec<Outgoing>) {
        let victim = env.claimed_from;
        if victim == self.me || !self.honest.get(victim.index()).copied().unwrap_or(false) {
            return;
        }
        let mut payload = env.payload;
        payload.value = forged_value(payload.value);
        let t = Triple {
            payload,
            claimed_from: victim,
            label: env.label,
        };
        if !self.forged.insert(t) {
            return;
        }
        let Some(mut route) = bfs_path(&self.view, victim, self.me) else {
            return;
        };
        route.pop();
        let Some(path) = FloodPath::from_nodes(&route) else {
            return;
        };
        for &w in self.view.neighbors(self.me) {
            if !route.contains(&w) {
                out.push((w, FloodEnvelope::with_triple(t, path)));
                self.forgeries += 1;
            }
        }
    }
}
