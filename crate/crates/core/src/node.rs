//! An honest node: purify, reliable broadcast and agreement stacked.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agreement::{Agreement, AgreementAction};
use crate::graph::{NodeId, Topology};
use crate::purify::{FloodEnvelope, Label, Purifier, PurifyConfig, Received, Triple};
use crate::rbcast::{BroadcastError, Broadcaster, ProtocolMessage, RbAction, Value};

/// How much of the stack reacts to acceptances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StackDepth {
    Purify,
    Broadcast,
    #[default]
    Agreement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeEvent {
    PurifySent(Triple),
    Accepted(Triple),
    Broadcast(ProtocolMessage),
    Validated(ProtocolMessage),
    Decided { phase: u32, value: Value },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Logged {
    pub at: u64,
    pub event: NodeEvent,
}

pub type Outgoing = (NodeId, FloodEnvelope);

#[derive(Clone, Debug)]
pub struct NodeParams {
    pub me: NodeId,
    /// The topology this node believes it runs on.
    pub view: Arc<Topology>,
    pub f: usize,
    pub purify: PurifyConfig,
    pub depth: StackDepth,
    pub coin_seed: u64,
}

#[derive(Clone, Debug)]
pub struct HonestNode {
    me: NodeId,
    depth: StackDepth,
    purify: Purifier,
    rb: Broadcaster,
    agreement: Agreement,
    log: Vec<Logged>,
    accepted_queue: VecDeque<Triple>,
    rb_buf: Vec<RbAction>,
    agr_buf: Vec<AgreementAction>,
}

impl HonestNode {
    pub fn new(p: NodeParams) -> Self {
        let n = p.view.n();
        HonestNode {
            me: p.me,
            depth: p.depth,
            purify: Purifier::new(p.me, p.view, &p.purify),
            rb: Broadcaster::new(p.me, n, p.f),
            agreement: Agreement::new(p.me, n, p.f, p.coin_seed),
            log: Vec::new(),
            accepted_queue: VecDeque::new(),
            rb_buf: Vec::new(),
            agr_buf: Vec::new(),
        }
    }

    pub fn me(&self) -> NodeId {
        self.me
    }

    pub fn purifier(&self) -> &Purifier {
        &self.purify
    }

    pub fn broadcaster(&self) -> &Broadcaster {
        &self.rb
    }

    pub fn agreement(&self) -> &Agreement {
        &self.agreement
    }

    pub fn log(&self) -> &[Logged] {
        &self.log
    }

    pub fn decision(&self) -> Option<(u32, Value)> {
        self.agreement.decision()
    }

    pub fn start_agreement(&mut self, input: Value, now: u64, out: &mut Vec<Outgoing>) {
        let mut acts = std::mem::take(&mut self.agr_buf);
        self.agreement.start(input, &mut acts);
        self.apply_agreement(&mut acts, now, out);
        self.agr_buf = acts;
        self.drain(now, out);
    }

    pub fn rb_broadcast(
        &mut self,
        m: ProtocolMessage,
        now: u64,
        out: &mut Vec<Outgoing>,
    ) -> Result<(), BroadcastError> {
        self.rb_send(m, now, out)?;
        self.drain(now, out);
        Ok(())
    }

    /// Purify-only send of `m` under `label`, claimed from this node.
    pub fn purify_send(&mut self, m: ProtocolMessage, label: Label, now: u64, out: &mut Vec<Outgoing>) {
        self.flood(Triple {
            payload: m,
            claimed_from: self.me,
            label,
        }, now, out);
        self.drain(now, out);
    }

    pub fn deliver(&mut self, from: NodeId, env: &FloodEnvelope, now: u64, out: &mut Vec<Outgoing>) -> Received {
        let r = self.purify.transmit(env, from, out);
        if let Received::Relayed { accepted: Some(t) } = r {
            self.accepted_queue.push_back(t);
            self.drain(now, out);
        }
        r
    }

    fn rb_send(&mut self, m: ProtocolMessage, now: u64, out: &mut Vec<Outgoing>) -> Result<(), BroadcastError> {
        let RbAction::Send(m, label) = self.rb.broadcast(m)? else {
            unreachable!("broadcast yields a send");
        };
        self.log.push(Logged {
            at: now,
            event: NodeEvent::Broadcast(m),
        });
        self.flood(Triple {
            payload: m,
            claimed_from: self.me,
            label,
        }, now, out);
        Ok(())
    }

    fn flood(&mut self, t: Triple, now: u64, out: &mut Vec<Outgoing>) {
        self.log.push(Logged {
            at: now,
            event: NodeEvent::PurifySent(t),
        });
        if let Some(acc) = self.purify.send(t, out) {
            self.accepted_queue.push_back(acc);
        }
    }

    fn drain(&mut self, now: u64, out: &mut Vec<Outgoing>) {
        while let Some(t) = self.accepted_queue.pop_front() {
            self.log.push(Logged {
                at: now,
                event: NodeEvent::Accepted(t),
            });
            if self.depth == StackDepth::Purify {
                continue;
            }
            let mut acts = std::mem::take(&mut self.rb_buf);
            self.rb.on_accept(&t, &mut acts);
            for a in acts.drain(..) {
                match a {
                    RbAction::Send(m, label) => self.flood(Triple {
                        payload: m,
                        claimed_from: self.me,
                        label,
                    }, now, out),
                    RbAction::Validated(m) => {
                        self.log.push(Logged {
                            at: now,
                            event: NodeEvent::Validated(m),
                        });
                        if self.depth == StackDepth::Agreement {
                            let mut ag = std::mem::take(&mut self.agr_buf);
                            self.agreement.on_validated(m, &mut ag);
                            self.apply_agreement(&mut ag, now, out);
                            self.agr_buf = ag;
                        }
                    }
                }
            }
            self.rb_buf = acts;
        }
    }

    fn apply_agreement(&mut self, acts: &mut Vec<AgreementAction>, now: u64, out: &mut Vec<Outgoing>) {
        for a in acts.drain(..) {
            match a {
                AgreementAction::Broadcast(m) => {
                    self.rb_send(m, now, out).expect("agreement broadcasts each round once");
                }
                AgreementAction::Decided {
                    phase,
                    value,
                    last_round,
                } => {
                    self.log.push(Logged {
                        at: now,
                        event: NodeEvent::Decided { phase, value },
                    });
                    self.rb.set_cutoff(last_round);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Drives a set of nodes over a FIFO queue without the simulator.
    fn run_fifo(nodes: &mut [HonestNode], mut queue: VecDeque<(NodeId, NodeId, FloodEnvelope)>) {
        let mut out = Vec::new();
        let mut now = 0;
        while let Some((from, to, env)) = queue.pop_front() {
            nodes[to.index()].deliver(from, &env, now, &mut out);
            queue.extend(out.drain(..).map(|(v, e)| (to, v, e)));
            now += 1;
        }
    }

    fn k4_nodes(depth: StackDepth) -> Vec<HonestNode> {
        let view = Arc::new(Topology::complete(4));
        (0..4)
            .map(|i| {
                HonestNode::new(NodeParams {
                    me: NodeId(i),
                    view: view.clone(),
                    f: 1,
                    purify: PurifyConfig::new(1),
                    depth,
                    coin_seed: i as u64,
                })
            })
            .collect()
    }

    #[test]
    fn all_honest_k4_decides_input_in_phase_zero() {
        let mut nodes = k4_nodes(StackDepth::Agreement);
        let mut queue = VecDeque::new();
        let mut out = Vec::new();
        for i in 0..4 {
            nodes[i].start_agreement(Value::One, 0, &mut out);
            queue.extend(out.drain(..).map(|(v, e)| (NodeId(i as u32), v, e)));
        }
        run_fifo(&mut nodes, queue);
        for n in &nodes {
            assert_eq!(n.decision(), Some((0, Value::One)));
        }
    }

    #[test]
    fn broadcast_validates_everywhere() {
        let mut nodes = k4_nodes(StackDepth::Broadcast);
        let mut out = Vec::new();
        let m = ProtocolMessage::new(NodeId(2), 1, Value::Zero);
        nodes[2].rb_broadcast(m, 0, &mut out).unwrap();
        let queue = out.drain(..).map(|(v, e)| (NodeId(2), v, e)).collect();
        run_fifo(&mut nodes, queue);
        for n in &nodes {
            assert_eq!(n.broadcaster().validated(NodeId(2), 1), Some(Value::Zero));
        }
    }
}
