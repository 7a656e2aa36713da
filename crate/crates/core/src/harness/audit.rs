//! Property checks over node event logs and the delivery trace.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::graph::NodeId;
use crate::node::{Logged, NodeEvent};
use crate::purify::Triple;
use crate::rbcast::{ProtocolMessage, Value};
use crate::simnet::{fairness_violations, fifo_violations, Trace};

/// What the auditor sees of one node.
#[derive(Clone, Copy, Debug)]
pub struct NodeRecord<'a> {
    pub id: NodeId,
    pub honest: bool,
    pub input: Option<Value>,
    pub log: &'a [Logged],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violations {
    pub agreement: bool,
    pub validity: bool,
    pub termination: bool,
    pub one_phase_lag: bool,
    pub purify_validity: bool,
    pub purify_integrity: bool,
    pub purify_duplicate: bool,
    pub rb_validity: bool,
    pub rb_no_duplication: bool,
    pub rb_integrity: bool,
    pub rb_consistency: bool,
    pub rb_totality: bool,
    pub fairness: bool,
    pub fifo: bool,
    pub containment: bool,
}

impl Violations {
    pub fn flags(&self) -> [(&'static str, bool); 15] {
        [
            ("agreement", self.agreement),
            ("validity", self.validity),
            ("termination", self.termination),
            ("one_phase_lag", self.one_phase_lag),
            ("purify_validity", self.purify_validity),
            ("purify_integrity", self.purify_integrity),
            ("purify_duplicate", self.purify_duplicate),
            ("rb_validity", self.rb_validity),
            ("rb_no_duplication", self.rb_no_duplication),
            ("rb_integrity", self.rb_integrity),
            ("rb_consistency", self.rb_consistency),
            ("rb_totality", self.rb_totality),
            ("fairness", self.fairness),
            ("fifo", self.fifo),
            ("containment", self.containment),
        ]
    }

    pub fn any(&self) -> bool {
        self.flags().iter().any(|&(_, v)| v)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.flags().iter().filter(|&&(_, v)| v).map(|&(k, _)| k).collect()
    }
}

fn honest<'a, 'b>(nodes: &'b [NodeRecord<'a>]) -> impl Iterator<Item = &'b NodeRecord<'a>> + Clone {
    nodes.iter().filter(|r| r.honest)
}

pub fn decision_of(log: &[Logged]) -> Option<(u32, Value)> {
    log.iter().find_map(|l| match l.event {
        NodeEvent::Decided { phase, value } => Some((phase, value)),
        _ => None,
    })
}

/// Highest round a node broadcast in, 0 if none.
fn top_round(log: &[Logged]) -> u32 {
    log.iter()
        .filter_map(|l| match l.event {
            NodeEvent::Broadcast(m) => Some(m.round),
            _ => None,
        })
        .max()
        .unwrap_or(0)
}

/// Last round a decided node still serves.
fn cutoff(log: &[Logged]) -> u32 {
    decision_of(log).map_or(u32::MAX, |(p, _)| 3 * p + 6)
}

/// Purify properties. Acceptance everywhere is only required at quiescence.
pub fn audit_purify(nodes: &[NodeRecord<'_>], quiescent: bool, v: &mut Violations) {
    let mut sent: HashMap<NodeId, HashSet<Triple>> = HashMap::new();
    for r in honest(nodes) {
        let set = sent.entry(r.id).or_default();
        for l in r.log {
            if let NodeEvent::PurifySent(t) = l.event {
                set.insert(t);
            }
        }
    }
    for w in honest(nodes) {
        let mut seen: HashMap<Triple, u32> = HashMap::new();
        for l in w.log {
            if let NodeEvent::Accepted(t) = l.event {
                *seen.entry(t).or_default() += 1;
                if let Some(set) = sent.get(&t.claimed_from) {
                    if !set.contains(&t) {
                        v.purify_integrity = true;
                    }
                }
            }
        }
        if seen.values().any(|&c| c > 1) {
            v.purify_duplicate = true;
        }
        if quiescent {
            for set in sent.values() {
                if set.iter().any(|t| !seen.contains_key(t)) {
                    v.purify_validity = true;
                }
            }
        }
    }
}

fn validations(log: &[Logged]) -> impl Iterator<Item = (u64, ProtocolMessage)> + '_ {
    log.iter().filter_map(|l| match l.event {
        NodeEvent::Validated(m) => Some((l.at, m)),
        _ => None,
    })
}

/// Reliable-broadcast properties. Validity and totality are judged at
/// quiescence and skip rounds past a receiver's post-decision cutoff.
pub fn audit_broadcast(nodes: &[NodeRecord<'_>], quiescent: bool, v: &mut Violations) {
    let mut broadcast_at: HashMap<ProtocolMessage, u64> = HashMap::new();
    for r in honest(nodes) {
        for l in r.log {
            if let NodeEvent::Broadcast(m) = l.event {
                broadcast_at.entry(m).or_insert(l.at);
            }
        }
    }
    let honest_ids: BTreeSet<NodeId> = honest(nodes).map(|r| r.id).collect();
    let mut agreed: BTreeMap<(NodeId, u32), Value> = BTreeMap::new();
    let mut per_node: Vec<(u32, HashSet<ProtocolMessage>)> = Vec::new();
    for w in honest(nodes) {
        let mut instances = HashSet::new();
        let mut got = HashSet::new();
        for (at, m) in validations(w.log) {
            if !instances.insert(m.instance()) {
                v.rb_no_duplication = true;
            }
            if honest_ids.contains(&m.source) && broadcast_at.get(&m).is_none_or(|&b| b > at) {
                v.rb_integrity = true;
            }
            match agreed.get(&m.instance()) {
                Some(&val) if val != m.value => v.rb_consistency = true,
                Some(_) => {}
                None => {
                    agreed.insert(m.instance(), m.value);
                }
            }
            got.insert(m);
        }
        per_node.push((cutoff(w.log), got));
    }
    if !quiescent {
        return;
    }
    let all_validated: HashSet<ProtocolMessage> = per_node.iter().flat_map(|(_, g)| g.iter().copied()).collect();
    for (cut, got) in &per_node {
        let due = |m: &ProtocolMessage| m.round <= *cut && !got.contains(m);
        if broadcast_at.keys().any(due) {
            v.rb_validity = true;
        }
        if all_validated.iter().any(due) {
            v.rb_totality = true;
        }
    }
}

/// Agreement properties. `finished` says the run can make no further
/// progress (quiescent), so undecided nodes are final.
pub fn audit_agreement(nodes: &[NodeRecord<'_>], finished: bool, v: &mut Violations) {
    let decisions: Vec<(Option<(u32, Value)>, u32)> =
        honest(nodes).map(|r| (decision_of(r.log), top_round(r.log))).collect();
    let values: BTreeSet<Value> = decisions.iter().filter_map(|(d, _)| d.map(|(_, v)| v)).collect();
    if values.len() > 1 {
        v.agreement = true;
    }
    let inputs: BTreeSet<Value> = honest(nodes).filter_map(|r| r.input).collect();
    if inputs.len() == 1 {
        let want = *inputs.iter().next().expect("one input");
        if values.iter().any(|&d| d != want) {
            v.validity = true;
        }
    }
    if decisions.iter().any(|(d, _)| d.is_none()) {
        v.termination = true;
    }
    if let Some(first) = decisions.iter().filter_map(|(d, _)| d.map(|(p, _)| p)).min() {
        let limit = first + 1;
        for &(d, top) in &decisions {
            let late = match d {
                Some((p, _)) => p > limit,
                // broadcasting in phase limit + 1 means it left phase `limit` undecided
                None => finished || top > 3 * (limit + 1),
            };
            if late {
                v.one_phase_lag = true;
            }
        }
    }
}

/// Scheduler properties; needs a full trace, a digest-only trace passes trivially.
pub fn audit_trace(trace: &Trace, v: &mut Violations) {
    let recs = trace.records();
    if !fairness_violations(recs).is_empty() {
        v.fairness = true;
    }
    if !fifo_violations(recs).is_empty() {
        v.fifo = true;
    }
}
