use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::NodeId;

/// How many steps an envelope may wait under the adversarial policy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessBound {
    /// Fixed number of dequeue steps.
    Fixed(u64),
    /// `factor * size` where `size` is the queue length once the envelope is in.
    QueueScaled(u64),
}

impl Default for FairnessBound {
    fn default() -> Self {
        FairnessBound::QueueScaled(10)
    }
}

/// Preference used by the adversarial policy whenever no envelope is due.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "nodes", rename_all = "snake_case")]
pub enum Priority {
    /// Channel whose head was sent most recently.
    #[default]
    NewestFirst,
    /// Hold back traffic touching these nodes for as long as the bound permits.
    Starve(Vec<NodeId>),
    /// Deliver traffic sent by these nodes first.
    Rush(Vec<NodeId>),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchedulerPolicy {
    /// Global send order.
    #[default]
    Fifo,
    /// Uniform over non-empty channels. Without an explicit seed the trial
    /// seed is used.
    Random {
        #[serde(default)]
        seed: Option<u64>,
    },
    Adversarial {
        #[serde(default)]
        bound: FairnessBound,
        #[serde(default)]
        priority: Priority,
    },
    /// Deliver the heads of the listed channels in order, then fall back to FIFO.
    #[serde(skip)]
    Replay(Vec<(NodeId, NodeId)>),
}

impl SchedulerPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            SchedulerPolicy::Fifo => "fifo",
            SchedulerPolicy::Random { .. } => "random",
            SchedulerPolicy::Adversarial { .. } => "adversarial",
            SchedulerPolicy::Replay(_) => "replay",
        }
    }

    /// The three built-in policies with default parameters.
    pub fn builtins() -> [SchedulerPolicy; 3] {
        [
            SchedulerPolicy::Fifo,
            SchedulerPolicy::Random { seed: None },
            SchedulerPolicy::Adversarial {
                bound: FairnessBound::default(),
                priority: Priority::default(),
            },
        ]
    }
}

pub(crate) struct Queued<P> {
    pub payload: P,
    pub seq: u64,
    pub enqueued_at: u64,
    pub deadline: u64,
}

/// Per-pair FIFO channels plus the policy that picks the next one.
pub(crate) struct Channels<P> {
    n: usize,
    queues: Vec<VecDeque<Queued<P>>>,
    active: Vec<usize>,
    slot: Vec<usize>,
    pending: usize,
    policy: SchedulerPolicy,
    rng: ChaCha8Rng,
    marked: Vec<bool>,
    replay_pos: usize,
}

pub(crate) enum Pick {
    Channel(usize),
    Empty,
    /// Replay named a channel with nothing queued.
    ReplayMismatch(NodeId, NodeId),
}

const NONE: usize = usize::MAX;

impl<P> Channels<P> {
    pub fn new(n: usize, policy: SchedulerPolicy, seed: u64) -> Self {
        let seed = match &policy {
            SchedulerPolicy::Random { seed: Some(s) } => *s,
            _ => seed,
        };
        let mut marked = vec![false; n];
        if let SchedulerPolicy::Adversarial {
            priority: Priority::Starve(set) | Priority::Rush(set),
            ..
        } = &policy
        {
            for u in set {
                if u.index() < n {
                    marked[u.index()] = true;
                }
            }
        }
        Channels {
            n,
            queues: (0..n * n).map(|_| VecDeque::new()).collect(),
            active: Vec::new(),
            slot: vec![NONE; n * n],
            pending: 0,
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            marked,
            replay_pos: 0,
        }
    }

    pub fn pending(&self) -> usize {
        self.pending
    }

    pub fn endpoints(&self, ch: usize) -> (NodeId, NodeId) {
        (NodeId::from(ch / self.n), NodeId::from(ch % self.n))
    }

    /// Bound assigned to an envelope enqueued now; `u64::MAX` when unbounded.
    pub fn bound_for_new(&self) -> u64 {
        match &self.policy {
            SchedulerPolicy::Adversarial { bound, .. } => match *bound {
                FairnessBound::Fixed(b) => b,
                FairnessBound::QueueScaled(k) => k.saturating_mul(self.pending as u64 + 1),
            },
            _ => u64::MAX,
        }
    }

    pub fn push(&mut self, from: NodeId, to: NodeId, payload: P, seq: u64, now: u64) -> u64 {
        let bound = self.bound_for_new();
        let deadline = now.saturating_add(bound);
        let ch = from.index() * self.n + to.index();
        let q = &mut self.queues[ch];
        // Keep deadlines non-decreasing along the channel so per-pair FIFO never
        // forces the head past its own deadline.
        for e in q.iter_mut().rev() {
            if e.deadline <= deadline {
                break;
            }
            e.deadline = deadline;
        }
        q.push_back(Queued {
            payload,
            seq,
            enqueued_at: now,
            deadline,
        });
        if self.slot[ch] == NONE {
            self.slot[ch] = self.active.len();
            self.active.push(ch);
        }
        self.pending += 1;
        bound
    }

    pub fn pop(&mut self, ch: usize) -> Queued<P> {
        let q = &mut self.queues[ch];
        let e = q.pop_front().expect("picked channel is non-empty");
        if q.is_empty() {
            let at = self.slot[ch];
            self.active.swap_remove(at);
            if at < self.active.len() {
                self.slot[self.active[at]] = at;
            }
            self.slot[ch] = NONE;
        }
        self.pending -= 1;
        e
    }

    fn head(&self, ch: usize) -> &Queued<P> {
        self.queues[ch].front().expect("active channel is non-empty")
    }

    fn min_by_key(&self, key: impl Fn(usize) -> u64) -> usize {
        let mut best = self.active[0];
        let mut best_key = key(best);
        for &ch in &self.active[1..] {
            let k = key(ch);
            if k < best_key {
                best = ch;
                best_key = k;
            }
        }
        best
    }

    pub fn pick(&mut self, now: u64) -> Pick {
        if let SchedulerPolicy::Replay(order) = &self.policy {
            if let Some(&(from, to)) = order.get(self.replay_pos) {
                self.replay_pos += 1;
                if from.index() >= self.n || to.index() >= self.n {
                    return Pick::ReplayMismatch(from, to);
                }
                let ch = from.index() * self.n + to.index();
                if self.queues[ch].is_empty() {
                    return Pick::ReplayMismatch(from, to);
                }
                return Pick::Channel(ch);
            }
        }
        if self.active.is_empty() {
            return Pick::Empty;
        }
        let ch = match &self.policy {
            SchedulerPolicy::Fifo | SchedulerPolicy::Replay(_) => {
                self.min_by_key(|c| self.head(c).seq)
            }
            SchedulerPolicy::Random { .. } => {
                let i = self.rng.gen_range(0..self.active.len());
                self.active[i]
            }
            SchedulerPolicy::Adversarial { priority, .. } => {
                let due = self.min_by_key(|c| self.head(c).deadline);
                if self.head(due).deadline <= now {
                    due
                } else {
                    match priority {
                        Priority::NewestFirst => self.min_by_key(|c| u64::MAX - self.head(c).seq),
                        Priority::Starve(_) => self.min_by_key(|c| {
                            let (a, b) = self.endpoints(c);
                            let held = self.marked[a.index()] || self.marked[b.index()];
                            ((held as u64) << 63) | self.head(c).seq
                        }),
                        Priority::Rush(_) => self.min_by_key(|c| {
                            let (a, _) = self.endpoints(c);
                            (((!self.marked[a.index()]) as u64) << 63) | self.head(c).seq
                        }),
                    }
                }
            }
        };
        Pick::Channel(ch)
    }
}
