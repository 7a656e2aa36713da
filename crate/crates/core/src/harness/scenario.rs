//! Named configurations for the under-connected cut graph and purify checks.

use std::str::FromStr;

use serde::Serialize;

use super::config::{ConfigError, Inputs, RunConfig, TopologySource, Workload};
use super::report::TrialReport;
use super::run::{execute, Execution, TrialError};
use crate::adversary::{AdversarySpec, CompositeRecord, Strategy};
use crate::graph::{CopyIndex, CoverMap, GenSpec, NodeId, Side};
use crate::node::NodeEvent;
use crate::rbcast::Value;
use crate::simnet::{SchedulerPolicy, TraceMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Scenario {
    E1,
    E2,
    E3,
    E4,
    PurifyPositive,
    PurifyNegative,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::E1,
        Scenario::E2,
        Scenario::E3,
        Scenario::E4,
        Scenario::PurifyPositive,
        Scenario::PurifyNegative,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::E1 => "E1",
            Scenario::E2 => "E2",
            Scenario::E3 => "E3",
            Scenario::E4 => "E4",
            Scenario::PurifyPositive => "purify_positive",
            Scenario::PurifyNegative => "purify_negative",
        }
    }

    /// Whether a correct stack is expected to trip an audit flag.
    pub fn expects_violation(self) -> bool {
        matches!(self, Scenario::E3 | Scenario::PurifyNegative)
    }

    pub fn config(self) -> RunConfig {
        let mut cfg = match self {
            Scenario::E1 | Scenario::E2 => {
                let mut c = RunConfig::generated(cut_graph(), 1);
                c.adversary = AdversarySpec::uniform(vec![NodeId(5)], Strategy::equivocate());
                c.inputs = if self == Scenario::E1 { Inputs::All0 } else { Inputs::All1 };
                c.trials = 100;
                c
            }
            Scenario::E3 => {
                let mut c = RunConfig::generated(cut_graph(), 1);
                c.adversary = AdversarySpec::uniform(vec![NodeId(4)], Strategy::SplitBrain);
                c.inputs = Inputs::CutSides;
                c.trials = 100;
                c
            }
            Scenario::E4 => {
                let base = TopologySource::Generator { spec: cut_graph() };
                let mut c = RunConfig::new(TopologySource::DoubleCover { base: Box::new(base) }, 1);
                c.inputs = Inputs::CopyIndexed;
                c.trials = 20;
                c
            }
            Scenario::PurifyPositive => {
                let mut c = RunConfig::generated(GenSpec::RandomKConnected { n: 7, k: 3 }, 1);
                c.workload = Workload::Purify;
                c.adversary = AdversarySpec::uniform(vec![NodeId(6)], Strategy::DropRelay);
                c.trials = 10;
                c
            }
            Scenario::PurifyNegative => {
                let mut c = RunConfig::generated(cut_graph(), 1);
                c.workload = Workload::Purify;
                c.adversary = AdversarySpec::uniform(vec![NodeId(4)], Strategy::DropRelay);
                c.trials = 10;
                c
            }
        };
        cfg.name = self.name().to_string();
        cfg.scheduler = SchedulerPolicy::Random { seed: None };
        cfg
    }
}

impl FromStr for Scenario {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ConfigError::Invalid {
                field: "scenario".into(),
                reason: format!("unknown scenario {s:?}"),
            })
    }
}

pub fn scenario(name: &str) -> Result<RunConfig, ConfigError> {
    Ok(name.parse::<Scenario>()?.config())
}

/// Six nodes: X = {0, 1}, Y = {2, 3}, R = {4}, T = {5}; vertex connectivity 2.
pub fn cut_graph() -> GenSpec {
    GenSpec::CutPartition {
        x: 2,
        y: 2,
        r: 1,
        t: 1,
        intra: 1.0,
        inter: 1.0,
    }
}

/// Honest nodes on the double cover decide the value of their copy index.
pub fn cover_decisions_follow_copies(report: &TrialReport, base_n: usize) -> bool {
    report.nodes.iter().all(|o| match o.decision {
        None => true,
        Some((_, v)) => v == Value::bit((o.node.index() >= base_n) as u8),
    })
}

/// Times an honest `Y` node accepted a triple claimed by an honest `X` node,
/// or the reverse.
pub fn cross_cut_acceptances(exec: &Execution, cfg: &RunConfig) -> Result<u64, ConfigError> {
    let prep = cfg.prepare()?;
    let part = prep.partition.expect("cut scenarios carry a partition");
    let mut hits = 0;
    for (i, actor) in exec.world.actors.iter().enumerate() {
        let w = NodeId::from(i);
        if !exec.report.nodes[i].honest {
            continue;
        }
        for l in actor.log() {
            if let NodeEvent::Accepted(t) = l.event {
                let far = match part.side(w) {
                    Some(Side::X) => Side::Y,
                    Some(Side::Y) => Side::X,
                    _ => continue,
                };
                if part.side(t.claimed_from) == Some(far) && !cfg.adversary.is_byzantine(t.claimed_from) {
                    hits += 1;
                }
            }
        }
    }
    Ok(hits)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Isomorphism {
    pub composite_len: usize,
    pub cover_len: usize,
    /// Length of the common prefix of (sender, receiver, payload) records.
    pub matched: usize,
    /// Decisions of every cover node agree between the two runs.
    pub decisions_match: bool,
}

impl Isomorphism {
    pub fn holds(&self) -> bool {
        self.composite_len == self.cover_len && self.matched == self.composite_len && self.decisions_match
    }
}

/// Runs trial `trial` of a split-brain config, then replays its composite
/// schedule on the double cover and compares the two runs record by record.
pub fn split_brain_isomorphism(e3: &RunConfig, trial: u64) -> Result<Isomorphism, TrialError> {
    let prep3 = e3.prepare()?;
    let run3 = execute(&prep3, trial, TraceMode::Digest, None)?;
    let sb = run3.world.split.as_ref().ok_or_else(|| ConfigError::Invalid {
        field: "adversary".into(),
        reason: "not a split-brain config".into(),
    })?;
    let composite: &[CompositeRecord] = sb.composite();

    let mut e4 = e3.clone();
    e4.topology = TopologySource::DoubleCover {
        base: Box::new(e3.topology.clone()),
    };
    e4.adversary = AdversarySpec::none();
    e4.inputs = Inputs::CopyIndexed;
    e4.max_events = composite.len().max(1) as u64;
    e4.max_phases = u32::MAX;
    let prep4 = e4.prepare()?;
    let order = composite.iter().map(|c| (c.sender, c.receiver)).collect();
    let run4 = execute(&prep4, trial, TraceMode::Full, Some(order))?;

    let recs = run4.trace.records();
    let matched = composite
        .iter()
        .zip(recs)
        .take_while(|(c, r)| c.sender == r.sender && c.receiver == r.receiver && c.payload_hash == r.payload_hash)
        .count();

    let map: &CoverMap = sb.map();
    let mut decisions_match = true;
    for (h, node) in sb.simulated() {
        decisions_match &= run4.report.nodes[h.index()].decision == node.decision();
    }
    for o in run3.report.honest() {
        let h = match map.partition().side(o.node) {
            Some(Side::X) => map.lift(o.node, CopyIndex::Zero),
            _ => map.lift(o.node, CopyIndex::One),
        };
        decisions_match &= run4.report.nodes[h.index()].decision == o.decision;
    }
    Ok(Isomorphism {
        composite_len: composite.len(),
        cover_len: recs.len(),
        matched,
        decisions_match,
    })
}
