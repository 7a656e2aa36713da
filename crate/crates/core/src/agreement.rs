//! Phased randomized binary agreement: three broadcast rounds per phase,
//! local coin on round-three ties.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::NodeId;
use crate::rbcast::{ProtocolMessage, Value};

fn count(counted: &[Value], v: Value) -> usize {
    counted.iter().filter(|&&c| c == v).count()
}

/// The value with the higher count among those passing `pass`; ties go to 0.
fn best(counted: &[Value], pass: impl Fn(usize) -> bool) -> Option<Value> {
    let (z, o) = (count(counted, Value::Zero), count(counted, Value::One));
    match (pass(z), pass(o)) {
        (true, true) if o > z => Some(Value::One),
        (true, _) => Some(Value::Zero),
        (false, true) => Some(Value::One),
        (false, false) => None,
    }
}

/// Round one: adopt a value held by more than `(n - f) / 2` of the counted messages.
pub fn round1_outcome(n: usize, f: usize, counted: &[Value], current: Value) -> Value {
    best(counted, |c| 2 * c > n - f).unwrap_or(current)
}

/// Round two: a value held by more than `n / 2` is adopted and marks the node ready.
pub fn round2_outcome(n: usize, counted: &[Value], current: Value) -> (Value, bool) {
    match best(counted, |c| 2 * c > n) {
        Some(v) => (v, true),
        None => (current, false),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Round3 {
    Decide(Value),
    Adopt(Value),
    Coin,
}

/// Round three: decide on more than `2f`, adopt on more than `f`, else toss.
pub fn round3_outcome(f: usize, counted: &[Value]) -> Round3 {
    if let Some(v) = best(counted, |c| c > 2 * f) {
        Round3::Decide(v)
    } else if let Some(v) = best(counted, |c| c > f) {
        Round3::Adopt(v)
    } else {
        Round3::Coin
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub node: NodeId,
    pub value: Value,
    pub phase: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AgreementAction {
    Broadcast(ProtocolMessage),
    /// Decided in `phase`; rounds after `last_round` are no longer needed.
    Decided { phase: u32, value: Value, last_round: u32 },
}

#[derive(Clone, Debug)]
pub struct Agreement {
    me: NodeId,
    n: usize,
    f: usize,
    value: Value,
    /// Round currently awaited; `0` before start.
    round: u32,
    ready: bool,
    decision: Option<(u32, Value)>,
    terminated: bool,
    coins: u64,
    /// Validated messages per round in validation order, one per source.
    validated: BTreeMap<u32, Vec<(NodeId, Value)>>,
    rng: ChaCha8Rng,
}

impl Agreement {
    pub fn new(me: NodeId, n: usize, f: usize, coin_seed: u64) -> Self {
        Agreement {
            me,
            n,
            f,
            value: Value::Zero,
            round: 0,
            ready: false,
            decision: None,
            terminated: false,
            coins: 0,
            validated: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(coin_seed),
        }
    }

    pub fn value(&self) -> Value {
        self.value
    }

    pub fn phase(&self) -> u32 {
        self.round.saturating_sub(1) / 3
    }

    pub fn awaited_round(&self) -> u32 {
        self.round
    }

    pub fn decision(&self) -> Option<(u32, Value)> {
        self.decision
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    pub fn ready_flag(&self) -> bool {
        self.ready
    }

    pub fn coin_tosses(&self) -> u64 {
        self.coins
    }

    pub fn validated_in(&self, round: u32) -> &[(NodeId, Value)] {
        self.validated.get(&round).map_or(&[], |v| v.as_slice())
    }

    pub fn start(&mut self, input: Value, out: &mut Vec<AgreementAction>) {
        assert!(self.round == 0, "started twice");
        self.value = input;
        self.round = 1;
        out.push(AgreementAction::Broadcast(ProtocolMessage::new(self.me, 1, input)));
        self.progress(out);
    }

    pub fn on_validated(&mut self, m: ProtocolMessage, out: &mut Vec<AgreementAction>) {
        let list = self.validated.entry(m.round).or_default();
        if list.iter().any(|&(s, _)| s == m.source) {
            return;
        }
        list.push((m.source, m.value));
        self.progress(out);
    }

    fn progress(&mut self, out: &mut Vec<AgreementAction>) {
        while !self.terminated && self.round > 0 {
            let quorum = self.n - self.f;
            let Some(list) = self.validated.get(&self.round) else {
                return;
            };
            if list.len() < quorum {
                return;
            }
            let counted: Vec<Value> = list[..quorum].iter().map(|&(_, v)| v).collect();
            let phase = self.phase();
            let next = self.round + 1;
            match (self.round - 1) % 3 + 1 {
                1 => {
                    self.value = round1_outcome(self.n, self.f, &counted, self.value);
                    self.broadcast(next, self.value, out);
                }
                2 => {
                    let (v, ready) = round2_outcome(self.n, &counted, self.value);
                    self.value = v;
                    self.ready = ready;
                    self.broadcast(next, if ready { v } else { Value::Empty }, out);
                }
                _ => match round3_outcome(self.f, &counted) {
                    Round3::Decide(v) => {
                        self.value = v;
                        self.decision = Some((phase, v));
                        self.terminated = true;
                        for r in next..next + 3 {
                            self.broadcast(r, v, out);
                        }
                        out.push(AgreementAction::Decided {
                            phase,
                            value: v,
                            last_round: next + 2,
                        });
                    }
                    Round3::Adopt(v) => {
                        self.value = v;
                        self.broadcast(next, v, out);
                    }
                    Round3::Coin => {
                        self.coins += 1;
                        self.value = Value::bit(self.rng.gen::<bool>() as u8);
                        self.broadcast(next, self.value, out);
                    }
                },
            }
        }
    }

    fn broadcast(&mut self, round: u32, v: Value, out: &mut Vec<AgreementAction>) {
        if !self.terminated {
            self.round = round;
        }
        out.push(AgreementAction::Broadcast(ProtocolMessage::new(self.me, round, v)));
    }
}
