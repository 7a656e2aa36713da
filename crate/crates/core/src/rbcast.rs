//! Double-echo reliable broadcast on top of purified channels.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeId;
use crate::purify::{Label, Triple};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Zero,
    One,
    /// No preference; only legal in the third round of a phase.
    Empty,
}

impl Value {
    pub fn bit(b: u8) -> Value {
        if b == 0 {
            Value::Zero
        } else {
            Value::One
        }
    }

    pub fn as_bit(self) -> Option<u8> {
        match self {
            Value::Zero => Some(0),
            Value::One => Some(1),
            Value::Empty => None,
        }
    }

    pub fn flipped(self) -> Value {
        match self {
            Value::Zero => Value::One,
            Value::One => Value::Zero,
            Value::Empty => Value::Empty,
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            Value::Zero => 0,
            Value::One => 1,
            Value::Empty => 2,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Zero => write!(f, "0"),
            Value::One => write!(f, "1"),
            Value::Empty => write!(f, "-"),
        }
    }
}

/// `round = 3 * phase + sub_round` with `sub_round` in `1..=3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProtocolMessage {
    pub source: NodeId,
    pub round: u32,
    pub value: Value,
}

impl ProtocolMessage {
    pub fn new(source: NodeId, round: u32, value: Value) -> Self {
        ProtocolMessage { source, round, value }
    }

    pub fn phase(&self) -> u32 {
        (self.round.max(1) - 1) / 3
    }

    pub fn sub_round(&self) -> u32 {
        (self.round.max(1) - 1) % 3 + 1
    }

    pub fn is_well_formed(&self) -> bool {
        self.round >= 1 && (self.value != Value::Empty || self.sub_round() == 3)
    }

    pub fn instance(&self) -> (NodeId, u32) {
        (self.source, self.round)
    }
}

impl fmt::Display for ProtocolMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.source, self.round, self.value)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BroadcastError {
    #[error("node {me} cannot broadcast a message with source {claimed}")]
    SourceMismatch { me: NodeId, claimed: NodeId },
    #[error("round {0} already broadcast")]
    DuplicateRound(u32),
    #[error("malformed message {0}")]
    Malformed(ProtocolMessage),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RbAction {
    /// Purify-send `m` with the given label.
    Send(ProtocolMessage, Label),
    Validated(ProtocolMessage),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BroadcastMetrics {
    pub echoes_sent: u64,
    pub readies_sent: u64,
    pub validations: u64,
    pub ignored_mismatch: u64,
    pub ignored_malformed: u64,
    pub ignored_conflict: u64,
    pub ignored_cutoff: u64,
}

/// First value recorded per peer, and how many distinct peers back each value.
#[derive(Clone, Debug, Default)]
struct Tally {
    voters: u32,
    counts: [u16; 3],
}

impl Tally {
    /// Records `peer`'s vote; `None` when the peer already voted.
    fn record(&mut self, peer: NodeId, v: Value) -> Option<usize> {
        let bit = 1u32 << peer.index();
        if self.voters & bit != 0 {
            return None;
        }
        self.voters |= bit;
        self.counts[v.index()] += 1;
        Some(self.counts[v.index()] as usize)
    }
}

#[derive(Clone, Debug)]
pub struct Broadcaster {
    me: NodeId,
    n: usize,
    f: usize,
    own_rounds: HashSet<u32>,
    echo_sent: HashSet<(NodeId, u32)>,
    echoes: HashMap<(NodeId, u32), Tally>,
    readies: HashMap<(NodeId, u32), Tally>,
    ready_sent: HashSet<ProtocolMessage>,
    validated: HashMap<(NodeId, u32), Value>,
    cutoff: Option<u32>,
    metrics: BroadcastMetrics,
}

impl Broadcaster {
    pub fn new(me: NodeId, n: usize, f: usize) -> Self {
        Broadcaster {
            me,
            n,
            f,
            own_rounds: HashSet::new(),
            echo_sent: HashSet::new(),
            echoes: HashMap::new(),
            readies: HashMap::new(),
            ready_sent: HashSet::new(),
            validated: HashMap::new(),
            cutoff: None,
            metrics: BroadcastMetrics::default(),
        }
    }

    pub fn metrics(&self) -> &BroadcastMetrics {
        &self.metrics
    }

    /// Stop taking part in instances of rounds later than `round`.
    pub fn set_cutoff(&mut self, round: u32) {
        self.cutoff = Some(round);
    }

    pub fn validated(&self, source: NodeId, round: u32) -> Option<Value> {
        self.validated.get(&(source, round)).copied()
    }

    pub fn broadcast(&mut self, m: ProtocolMessage) -> Result<RbAction, BroadcastError> {
        if m.source != self.me {
            return Err(BroadcastError::SourceMismatch {
                me: self.me,
                claimed: m.source,
            });
        }
        if !m.is_well_formed() {
            return Err(BroadcastError::Malformed(m));
        }
        if !self.own_rounds.insert(m.round) {
            return Err(BroadcastError::DuplicateRound(m.round));
        }
        Ok(RbAction::Send(m, Label::Initial))
    }

    /// Feeds a purify acceptance; returns the resulting actions.
    pub fn on_accept(&mut self, t: &Triple, out: &mut Vec<RbAction>) {
        let m = t.payload;
        if !m.is_well_formed() || m.source.index() >= self.n {
            self.metrics.ignored_malformed += 1;
            return;
        }
        if self.cutoff.is_some_and(|c| m.round > c) {
            self.metrics.ignored_cutoff += 1;
            return;
        }
        match t.label {
            Label::Initial => self.on_initial(m, t.claimed_from, out),
            Label::Echo => self.on_echo(m, t.claimed_from, out),
            Label::Ready => self.on_ready(m, t.claimed_from, out),
        }
    }

    fn on_initial(&mut self, m: ProtocolMessage, from: NodeId, out: &mut Vec<RbAction>) {
        if m.source != from {
            self.metrics.ignored_mismatch += 1;
            return;
        }
        if self.echo_sent.insert(m.instance()) {
            self.metrics.echoes_sent += 1;
            out.push(RbAction::Send(m, Label::Echo));
        }
    }

    fn on_echo(&mut self, m: ProtocolMessage, from: NodeId, out: &mut Vec<RbAction>) {
        let Some(count) = self.echoes.entry(m.instance()).or_default().record(from, m.value) else {
            self.metrics.ignored_conflict += 1;
            return;
        };
        if 2 * count > self.n + self.f {
            self.send_ready(m, out);
        }
    }

    fn on_ready(&mut self, m: ProtocolMessage, from: NodeId, out: &mut Vec<RbAction>) {
        let Some(count) = self.readies.entry(m.instance()).or_default().record(from, m.value) else {
            self.metrics.ignored_conflict += 1;
            return;
        };
        if count > self.f {
            self.send_ready(m, out);
        }
        if count > 2 * self.f {
            if let std::collections::hash_map::Entry::Vacant(e) = self.validated.entry(m.instance()) {
                e.insert(m.value);
                self.metrics.validations += 1;
                out.push(RbAction::Validated(m));
            }
        }
    }

    fn send_ready(&mut self, m: ProtocolMessage, out: &mut Vec<RbAction>) {
        if self.ready_sent.insert(m) {
            self.metrics.readies_sent += 1;
            out.push(RbAction::Send(m, Label::Ready));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(src: u32, round: u32, v: Value) -> ProtocolMessage {
        ProtocolMessage::new(NodeId(src), round, v)
    }

    fn triple(m: ProtocolMessage, from: u32, label: Label) -> Triple {
        Triple {
            payload: m,
            claimed_from: NodeId(from),
            label,
        }
    }

    fn feed(b: &mut Broadcaster, t: Triple) -> Vec<RbAction> {
        let mut out = Vec::new();
        b.on_accept(&t, &mut out);
        out
    }

    #[test]
    fn round_arithmetic() {
        let m = msg(0, 6, Value::Empty);
        assert_eq!((m.phase(), m.sub_round()), (1, 3));
        assert!(m.is_well_formed());
        assert!(!msg(0, 4, Value::Empty).is_well_formed());
        assert_eq!(msg(0, 1, Value::One).phase(), 0);
    }

    #[test]
    fn broadcast_discipline() {
        let mut b = Broadcaster::new(NodeId(0), 4, 1);
        let m = msg(0, 1, Value::One);
        assert_eq!(b.broadcast(m), Ok(RbAction::Send(m, Label::Initial)));
        assert_eq!(b.broadcast(m), Err(BroadcastError::DuplicateRound(1)));
        assert!(matches!(
            b.broadcast(msg(1, 2, Value::One)),
            Err(BroadcastError::SourceMismatch { .. })
        ));
    }

    #[test]
    fn echo_once_and_source_check() {
        let mut b = Broadcaster::new(NodeId(3), 4, 1);
        let m = msg(0, 1, Value::One);
        assert_eq!(feed(&mut b, triple(m, 0, Label::Initial)), vec![RbAction::Send(m, Label::Echo)]);
        assert!(feed(&mut b, triple(m, 0, Label::Initial)).is_empty());
        assert!(feed(&mut b, triple(msg(0, 2, Value::One), 2, Label::Initial)).is_empty());
        assert_eq!(b.metrics().ignored_mismatch, 1);
    }

    #[test]
    fn echo_threshold_n7_f2() {
        let mut b = Broadcaster::new(NodeId(6), 7, 2);
        let m = msg(0, 1, Value::Zero);
        for p in 0..4 {
            assert!(feed(&mut b, triple(m, p, Label::Echo)).is_empty());
        }
        assert_eq!(feed(&mut b, triple(m, 4, Label::Echo)), vec![RbAction::Send(m, Label::Ready)]);
        assert!(feed(&mut b, triple(m, 5, Label::Echo)).is_empty());
    }

    #[test]
    fn echo_threshold_n4_f1_and_conflicts() {
        let mut b = Broadcaster::new(NodeId(3), 4, 1);
        let m = msg(0, 1, Value::Zero);
        assert!(feed(&mut b, triple(m, 0, Label::Echo)).is_empty());
        assert!(feed(&mut b, triple(m.flip(), 0, Label::Echo)).is_empty());
        assert!(feed(&mut b, triple(m, 1, Label::Echo)).is_empty());
        assert_eq!(feed(&mut b, triple(m, 2, Label::Echo)), vec![RbAction::Send(m, Label::Ready)]);
        assert_eq!(b.metrics().ignored_conflict, 1);
    }

    #[test]
    fn ready_amplifies_then_validates_once() {
        let mut b = Broadcaster::new(NodeId(6), 7, 2);
        let m = msg(0, 1, Value::One);
        assert!(feed(&mut b, triple(m, 0, Label::Ready)).is_empty());
        assert!(feed(&mut b, triple(m, 1, Label::Ready)).is_empty());
        assert_eq!(feed(&mut b, triple(m, 2, Label::Ready)), vec![RbAction::Send(m, Label::Ready)]);
        assert!(feed(&mut b, triple(m, 3, Label::Ready)).is_empty());
        assert_eq!(feed(&mut b, triple(m, 4, Label::Ready)), vec![RbAction::Validated(m)]);
        assert!(feed(&mut b, triple(m, 5, Label::Ready)).is_empty());
        assert_eq!(b.validated(NodeId(0), 1), Some(Value::One));
    }

    #[test]
    fn two_readies_do_not_validate_with_f1() {
        let mut b = Broadcaster::new(NodeId(3), 4, 1);
        let m = msg(0, 1, Value::One);
        feed(&mut b, triple(m, 1, Label::Ready));
        let out = feed(&mut b, triple(m, 2, Label::Ready));
        assert_eq!(out, vec![RbAction::Send(m, Label::Ready)]);
        assert_eq!(b.validated(NodeId(0), 1), None);
    }

    #[test]
    fn cutoff_silences_later_rounds() {
        let mut b = Broadcaster::new(NodeId(3), 4, 1);
        b.set_cutoff(6);
        assert!(feed(&mut b, triple(msg(0, 7, Value::One), 0, Label::Initial)).is_empty());
        assert_eq!(feed(&mut b, triple(msg(0, 6, Value::One), 0, Label::Initial)).len(), 1);
    }

    impl ProtocolMessage {
        fn flip(self) -> Self {
            ProtocolMessage {
                value: self.value.flipped(),
                ..self
            }
        }
    }
}
