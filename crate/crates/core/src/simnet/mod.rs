//! Discrete-event asynchronous network: authenticated point-to-point channels
//! over a [`Topology`], delivery order chosen by a [`SchedulerPolicy`].

mod scheduler;
mod trace;

use std::collections::VecDeque;

use thiserror::Error;

use crate::graph::{NodeId, Topology};
use scheduler::{Channels, Pick};

pub use scheduler::{FairnessBound, Priority, SchedulerPolicy};
pub use trace::{fairness_violations, fifo_violations, Trace, TraceMode, TraceRecord};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("{from} -> {to} is not an edge")]
    TopologyViolation { from: NodeId, to: NodeId },
    #[error("node {actor} may not send as {from}")]
    Impersonation { actor: NodeId, from: NodeId },
    #[error("replay schedule names the empty channel {from} -> {to}")]
    ReplayMismatch { from: NodeId, to: NodeId },
    #[error("handler failed at node {node}: {message}")]
    Handler { node: NodeId, message: String },
}

/// Anything carried by the network.
pub trait Payload {
    /// Stable content hash used in traces.
    fn digest(&self) -> u64;
    fn label(&self) -> &'static str;
}

/// A delivered envelope as seen by the receiving handler. The sender is the
/// simulator's stamp.
#[derive(Debug)]
pub struct Delivery<'a, P> {
    pub event_idx: u64,
    pub sender: NodeId,
    pub receiver: NodeId,
    pub send_seq: u64,
    pub payload: &'a P,
}

pub trait Handler<P> {
    fn handle(&mut self, delivery: &Delivery<'_, P>, out: &mut Outbox<'_, P>) -> Result<(), SimError>;
}

/// Send buffer for one activation of `me`.
pub struct Outbox<'a, P> {
    me: NodeId,
    topo: &'a Topology,
    coalition: &'a [bool],
    sends: &'a mut Vec<(NodeId, NodeId, P)>,
    rejected: &'a mut u64,
}

impl<P> Outbox<'_, P> {
    pub fn me(&self) -> NodeId {
        self.me
    }

    pub fn send(&mut self, to: NodeId, payload: P) -> Result<(), SimError> {
        self.send_as(self.me, to, payload)
    }

    /// Send stamped with `from`, which must be `me` or, when `me` is in the
    /// Byzantine coalition, another coalition member.
    pub fn send_as(&mut self, from: NodeId, to: NodeId, payload: P) -> Result<(), SimError> {
        let member = |u: NodeId| self.coalition.get(u.index()).copied().unwrap_or(false);
        if from != self.me && !(member(self.me) && member(from)) {
            *self.rejected += 1;
            return Err(SimError::Impersonation {
                actor: self.me,
                from,
            });
        }
        if from != to && !self.topo.has_edge(from, to) {
            *self.rejected += 1;
            return Err(SimError::TopologyViolation { from, to });
        }
        self.sends.push((from, to, payload));
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepResult {
    Delivered { sender: NodeId, receiver: NodeId },
    Quiescent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Satisfied,
    Stalled,
    BudgetExhausted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub events: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NetStats {
    pub sent: u64,
    pub delivered: u64,
    pub self_delivered: u64,
    pub rejected: u64,
}

pub struct Simulator<P> {
    topo: Topology,
    coalition: Vec<bool>,
    channels: Channels<P>,
    next_seq: u64,
    stats: NetStats,
    trace: Trace,
    scratch: Vec<(NodeId, NodeId, P)>,
}

impl<P: Payload> Simulator<P> {
    pub fn new(topo: Topology, policy: SchedulerPolicy, seed: u64, mode: TraceMode) -> Self {
        let n = topo.n();
        Simulator {
            coalition: vec![false; n],
            channels: Channels::new(n, policy, seed),
            topo,
            next_seq: 0,
            stats: NetStats::default(),
            trace: Trace::new(mode),
            scratch: Vec::new(),
        }
    }

    /// Marks the nodes allowed to send on each other's behalf.
    pub fn set_coalition(&mut self, members: &[NodeId]) {
        self.coalition.iter_mut().for_each(|c| *c = false);
        for u in members {
            self.coalition[u.index()] = true;
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn pending(&self) -> usize {
        self.channels.pending()
    }

    pub fn now(&self) -> u64 {
        self.stats.delivered
    }

    pub fn stats(&self) -> NetStats {
        self.stats
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    /// Runs `f` as an activation of `node` outside of any delivery (e.g. start).
    pub fn activate<H, F>(&mut self, h: &mut H, node: NodeId, f: F) -> Result<(), SimError>
    where
        H: Handler<P>,
        F: FnOnce(&mut H, &mut Outbox<'_, P>) -> Result<(), SimError>,
    {
        let mut sends = std::mem::take(&mut self.scratch);
        let res = {
            let mut out = Outbox {
                me: node,
                topo: &self.topo,
                coalition: &self.coalition,
                sends: &mut sends,
                rejected: &mut self.stats.rejected,
            };
            f(h, &mut out)
        };
        let res = res.and_then(|_| self.commit(h, &mut sends));
        sends.clear();
        self.scratch = sends;
        res
    }

    /// Enqueues buffered sends; self-addressed ones are handled on the spot,
    /// ahead of any other event, and are not traced.
    fn commit<H: Handler<P>>(
        &mut self,
        h: &mut H,
        sends: &mut Vec<(NodeId, NodeId, P)>,
    ) -> Result<(), SimError> {
        let mut local = VecDeque::new();
        loop {
            for (from, to, p) in sends.drain(..) {
                if from == to {
                    local.push_back((from, p));
                } else {
                    let seq = self.next_seq;
                    self.next_seq += 1;
                    self.channels.push(from, to, p, seq, self.stats.delivered);
                    self.stats.sent += 1;
                }
            }
            let Some((node, p)) = local.pop_front() else {
                return Ok(());
            };
            self.stats.self_delivered += 1;
            let d = Delivery {
                event_idx: self.stats.delivered,
                sender: node,
                receiver: node,
                send_seq: u64::MAX,
                payload: &p,
            };
            let mut out = Outbox {
                me: node,
                topo: &self.topo,
                coalition: &self.coalition,
                sends,
                rejected: &mut self.stats.rejected,
            };
            h.handle(&d, &mut out)?;
        }
    }

    /// Delivers one envelope chosen by the policy.
    pub fn step<H: Handler<P>>(&mut self, h: &mut H) -> Result<StepResult, SimError> {
        let now = self.stats.delivered;
        let ch = match self.channels.pick(now) {
            Pick::Empty => return Ok(StepResult::Quiescent),
            Pick::ReplayMismatch(from, to) => return Err(SimError::ReplayMismatch { from, to }),
            Pick::Channel(c) => c,
        };
        let (sender, receiver) = self.channels.endpoints(ch);
        let q = self.channels.pop(ch);
        self.trace.push(TraceRecord {
            event_idx: now,
            sender,
            receiver,
            payload_hash: q.payload.digest(),
            label: q.payload.label(),
            seq: q.seq,
            enqueued_at: q.enqueued_at,
            bound: if q.deadline == u64::MAX {
                u64::MAX
            } else {
                q.deadline - q.enqueued_at
            },
        });
        self.stats.delivered += 1;
        let mut sends = std::mem::take(&mut self.scratch);
        let res = {
            let d = Delivery {
                event_idx: now,
                sender,
                receiver,
                send_seq: q.seq,
                payload: &q.payload,
            };
            let mut out = Outbox {
                me: receiver,
                topo: &self.topo,
                coalition: &self.coalition,
                sends: &mut sends,
                rejected: &mut self.stats.rejected,
            };
            h.handle(&d, &mut out)
        };
        let res = res.and_then(|_| self.commit(h, &mut sends));
        sends.clear();
        self.scratch = sends;
        res.map(|_| StepResult::Delivered { sender, receiver })
    }

    /// Steps until `done` holds, the network is quiescent, or `max_events`
    /// deliveries have been made.
    pub fn run_until<H, F>(&mut self, h: &mut H, max_events: u64, mut done: F) -> Result<RunOutcome, SimError>
    where
        H: Handler<P>,
        F: FnMut(&H) -> bool,
    {
        let mut events = 0;
        loop {
            if done(h) {
                return Ok(RunOutcome {
                    status: RunStatus::Satisfied,
                    events,
                });
            }
            if events >= max_events {
                return Ok(RunOutcome {
                    status: RunStatus::BudgetExhausted,
                    events,
                });
            }
            match self.step(h)? {
                StepResult::Quiescent => {
                    return Ok(RunOutcome {
                        status: RunStatus::Stalled,
                        events,
                    })
                }
                StepResult::Delivered { .. } => events += 1,
            }
        }
    }
}
