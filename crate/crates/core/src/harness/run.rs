use std::sync::Arc;

use thiserror::Error;

use super::audit::{self, NodeRecord, Violations};
use super::config::{ConfigError, Prepared, RunConfig, Workload};
use super::report::{MessageCounts, NodeOutcome, TrialReport, TrialStatus};
use crate::adversary::{cover_coin_seed, real_cover_id, ByzantineNode, SplitBrain, Strategy};
use crate::graph::{CoverMap, NodeId};
use crate::node::{HonestNode, NodeParams, Outgoing};
use crate::purify::{FloodEnvelope, Label};
use crate::rbcast::{ProtocolMessage, Value};
use crate::seed::derive_path;
use crate::simnet::{
    Delivery, Handler, Outbox, RunStatus, SchedulerPolicy, SimError, Simulator, Trace, TraceMode,
};

#[derive(Debug, Error)]
pub enum TrialError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
}

pub enum Actor {
    Honest(HonestNode),
    Byzantine(ByzantineNode),
    /// Played by the split-brain coalition.
    Coalition,
}

impl Actor {
    pub fn log(&self) -> &[crate::node::Logged] {
        match self {
            Actor::Honest(h) => h.log(),
            Actor::Byzantine(b) => b.inner().map_or(&[], |i| i.log()),
            Actor::Coalition => &[],
        }
    }

    fn honest(&self) -> Option<&HonestNode> {
        match self {
            Actor::Honest(h) => Some(h),
            _ => None,
        }
    }
}

/// Every participant of one trial, addressed by simulated-network id.
pub struct World {
    pub actors: Vec<Actor>,
    pub inputs: Vec<Value>,
    pub split: Option<SplitBrain>,
    /// Set when the network is a double cover and nodes run with base ids.
    pub cover: Option<CoverMap>,
    workload: Workload,
    buf: Vec<Outgoing>,
    sbuf: Vec<(NodeId, NodeId, FloodEnvelope)>,
}

impl World {
    fn proto_id(&self, h: NodeId) -> NodeId {
        self.cover.as_ref().map_or(h, |m| m.project(h).0)
    }

    fn flush(&mut self, h: NodeId, out: &mut Outbox<'_, FloodEnvelope>) -> Result<(), SimError> {
        let mut buf = std::mem::take(&mut self.buf);
        let mut res = Ok(());
        for (g_to, env) in buf.drain(..) {
            let to = self.cover.as_ref().map_or(g_to, |m| m.lift_neighbor(h, g_to));
            if res.is_ok() {
                res = out.send(to, env);
            }
        }
        self.buf = buf;
        res
    }

    fn flush_split(&mut self, out: &mut Outbox<'_, FloodEnvelope>) -> Result<(), SimError> {
        let mut sbuf = std::mem::take(&mut self.sbuf);
        let mut res = Ok(());
        for (from, to, env) in sbuf.drain(..) {
            if res.is_ok() {
                res = out.send_as(from, to, env);
            }
        }
        self.sbuf = sbuf;
        res
    }

    /// First action of node `h`.
    fn start(&mut self, h: NodeId, now: u64, out: &mut Outbox<'_, FloodEnvelope>) -> Result<(), SimError> {
        let me = self.proto_id(h);
        let input = self.inputs[h.index()];
        let m = ProtocolMessage::new(me, 1, input);
        let workload = self.workload;
        let buf = &mut self.buf;
        match &mut self.actors[h.index()] {
            Actor::Honest(node) => match workload {
                Workload::Agreement => node.start_agreement(input, now, buf),
                Workload::Broadcast => node
                    .rb_broadcast(m, now, buf)
                    .map_err(|e| SimError::Handler {
                        node: h,
                        message: e.to_string(),
                    })?,
                Workload::Purify => node.purify_send(m, Label::Initial, now, buf),
            },
            Actor::Byzantine(b) => match workload {
                Workload::Agreement => b.start_agreement(input, now, buf),
                Workload::Broadcast => b.rb_broadcast(m, now, buf),
                Workload::Purify => b.purify_send(m, Label::Initial, now, buf),
            },
            Actor::Coalition => return Ok(()),
        }
        self.flush(h, out)
    }

    fn honest_nodes(&self) -> impl Iterator<Item = &HonestNode> {
        self.actors.iter().filter_map(Actor::honest)
    }

    fn all_decided(&self) -> bool {
        self.honest_nodes().all(|n| n.decision().is_some())
    }

    fn phase_reached(&self, cap: u32) -> bool {
        self.honest_nodes()
            .any(|n| n.decision().is_none() && n.agreement().phase() >= cap)
    }
}

impl Handler<FloodEnvelope> for World {
    fn handle(
        &mut self,
        d: &Delivery<'_, FloodEnvelope>,
        out: &mut Outbox<'_, FloodEnvelope>,
    ) -> Result<(), SimError> {
        let now = d.event_idx;
        let from = self.proto_id(d.sender);
        let buf = &mut self.buf;
        match &mut self.actors[d.receiver.index()] {
            Actor::Honest(node) => {
                node.deliver(from, d.payload, now, buf);
            }
            Actor::Byzantine(b) => b.deliver(from, d.payload, now, buf),
            Actor::Coalition => {
                let sb = self.split.as_mut().expect("coalition without split brain");
                sb.deliver(d.sender, d.receiver, d.payload, now, &mut self.sbuf);
                return self.flush_split(out);
            }
        }
        if let Some(sb) = self.split.as_mut() {
            sb.record_real(d.sender, d.receiver, d.payload);
        }
        self.flush(d.receiver, out)
    }
}

/// A finished trial with everything needed for further checks.
pub struct Execution {
    pub report: TrialReport,
    pub world: World,
    pub trace: Trace,
}

pub fn trial_seed(cfg: &RunConfig, trial: u64) -> u64 {
    derive_path(cfg.seed, &[1, trial])
}

pub fn run_trial(cfg: &RunConfig, trial: u64) -> Result<TrialReport, TrialError> {
    let prep = cfg.prepare()?;
    Ok(execute(&prep, trial, TraceMode::Digest, None)?.report)
}

/// Runs one trial of a prepared config. `replay` overrides the scheduler.
pub fn execute(
    prep: &Prepared,
    trial: u64,
    mode: TraceMode,
    replay: Option<Vec<(NodeId, NodeId)>>,
) -> Result<Execution, SimError> {
    let cfg = &prep.cfg;
    let seed = trial_seed(cfg, trial);
    let n = prep.g.n();
    let net_n = prep.net.n();
    let view = Arc::new(prep.g.clone());
    let purify = cfg.purify_config();
    let depth = cfg.workload.depth();
    let honest_mask: Vec<bool> = (0..n).map(|i| !cfg.adversary.is_byzantine(NodeId::from(i))).collect();

    let cover_map = prep
        .cover
        .then(|| CoverMap::new(n, prep.partition.clone().expect("checked at prepare")));
    let split_part = cfg
        .adversary
        .byzantine
        .first()
        .is_some_and(|&u| cfg.adversary.strategy_of(u) == Some(&Strategy::SplitBrain));
    let split = if split_part {
        let part = prep.partition.clone().expect("checked at prepare");
        Some(SplitBrain::new(view.clone(), part, cfg.f, &purify, seed).map_err(|e| SimError::Handler {
            node: NodeId(0),
            message: e.to_string(),
        })?)
    } else {
        None
    };

    let mut actors = Vec::with_capacity(net_n);
    let mut inputs = Vec::with_capacity(net_n);
    for i in 0..net_n {
        let h = NodeId::from(i);
        let me = cover_map.as_ref().map_or(h, |m| m.project(h).0);
        // coins follow the double-cover id so split-brain runs line up with cover runs
        let coin_id = match (&split, &cover_map) {
            (Some(sb), _) => real_cover_id(sb.map(), h),
            _ => h,
        };
        let params = NodeParams {
            me,
            view: view.clone(),
            f: cfg.f,
            purify: purify.clone(),
            depth,
            coin_seed: cover_coin_seed(seed, coin_id),
        };
        inputs.push(cfg.inputs.value(prep, seed, h));
        actors.push(match cfg.adversary.strategy_of(me) {
            None => Actor::Honest(HonestNode::new(params)),
            Some(Strategy::SplitBrain) => Actor::Coalition,
            Some(s) => Actor::Byzantine(ByzantineNode::new(params, s.clone(), honest_mask.clone())),
        });
    }
    let mut world = World {
        actors,
        inputs,
        split,
        cover: cover_map,
        workload: cfg.workload,
        buf: Vec::new(),
        sbuf: Vec::new(),
    };

    let policy = match replay {
        Some(order) => SchedulerPolicy::Replay(order),
        None => cfg.scheduler.clone(),
    };
    let mut sim: Simulator<FloodEnvelope> =
        Simulator::new(prep.net.clone(), policy, derive_path(seed, &[2]), mode);
    if let Some(sb) = &world.split {
        sim.set_coalition(&sb.members());
    }
    for i in 0..net_n {
        sim.activate(&mut world, NodeId::from(i), |w, out| w.start(NodeId::from(i), 0, out))?;
    }
    if let Some(first) = world.split.as_ref().map(|sb| sb.members()[0]) {
        sim.activate(&mut world, first, |w, out| {
            let sb = w.split.as_mut().expect("split brain");
            sb.start(0, &mut w.sbuf);
            w.flush_split(out)
        })?;
    }

    let agreement = cfg.workload == Workload::Agreement;
    let cap = cfg.max_phases;
    let outcome = sim.run_until(&mut world, cfg.max_events, |w| {
        agreement && (w.all_decided() || w.phase_reached(cap))
    })?;
    let status = match outcome.status {
        RunStatus::Satisfied if world.all_decided() => TrialStatus::Decided,
        RunStatus::Satisfied => TrialStatus::PhaseBudget,
        RunStatus::Stalled => TrialStatus::Quiescent,
        RunStatus::BudgetExhausted => TrialStatus::EventBudget,
    };
    let stats = sim.stats();
    let trace = sim.into_trace();
    let report = build_report(&world, prep, trial, seed, status, outcome.events, stats.rejected, stats.sent, &trace);
    Ok(Execution { report, world, trace })
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    world: &World,
    prep: &Prepared,
    trial: u64,
    seed: u64,
    status: TrialStatus,
    events: u64,
    rejected: u64,
    sent: u64,
    trace: &Trace,
) -> TrialReport {
    let cfg = &prep.cfg;
    let mut nodes = Vec::new();
    let mut records = Vec::new();
    let mut messages = MessageCounts {
        sent,
        delivered: events,
        rejected,
        ..MessageCounts::default()
    };
    let mut coin_tosses = 0;
    let mut max_phase = 0;
    for (i, actor) in world.actors.iter().enumerate() {
        let h = NodeId::from(i);
        let honest = matches!(actor, Actor::Honest(_));
        let log = actor.log();
        let decision = if honest { audit::decision_of(log) } else { None };
        nodes.push(NodeOutcome {
            node: h,
            honest,
            input: honest.then_some(world.inputs[i]),
            decision,
        });
        records.push(NodeRecord {
            id: world.proto_id(h),
            honest,
            input: honest.then_some(world.inputs[i]),
            log,
        });
        let inner = match actor {
            Actor::Honest(n) => Some(n),
            Actor::Byzantine(b) => {
                messages.forgeries += b.forgeries();
                b.inner()
            }
            Actor::Coalition => None,
        };
        if let Some(node) = inner {
            let m = node.purifier().metrics();
            messages.stored_peak = messages.stored_peak.max(node.purifier().storage_peak() as u64);
            messages.discarded += m.discarded_loop + m.discarded_invalid + m.discarded_duplicate;
            if honest {
                messages.accepted += m.accepted;
                coin_tosses += node.agreement().coin_tosses();
                max_phase = max_phase.max(node.agreement().phase());
            }
        }
    }
    if let Some(sb) = &world.split {
        messages.internal = sb.internal_deliveries();
    }

    let mut v = Violations::default();
    // protocol ids repeat on a double cover, so per-id properties do not apply there
    if !prep.cover {
        let quiescent = status == TrialStatus::Quiescent;
        audit::audit_purify(&records, quiescent, &mut v);
        if cfg.workload != Workload::Purify {
            audit::audit_broadcast(&records, quiescent, &mut v);
        }
        if cfg.workload == Workload::Agreement {
            audit::audit_agreement(&records, quiescent, &mut v);
        }
    }
    audit::audit_trace(trace, &mut v);
    v.containment = rejected > 0;

    let last_decision_phase = nodes.iter().filter_map(|o| o.decision.map(|d| d.0)).max();
    TrialReport {
        trial,
        seed,
        status,
        events,
        nodes,
        last_decision_phase,
        max_phase,
        coin_tosses,
        messages,
        violations: v,
        trace_digest: format!("{:016x}", trace.digest()),
    }
}
