use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::graph::NodeId;
use crate::seed::derive_seed;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    /// Rolling digest only.
    #[default]
    Digest,
    /// Keep every record.
    Full,
}

/// One delivery.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub event_idx: u64,
    pub sender: NodeId,
    pub receiver: NodeId,
    pub payload_hash: u64,
    pub label: &'static str,
    pub seq: u64,
    pub enqueued_at: u64,
    /// Fairness bound in force for this envelope; `u64::MAX` when unbounded.
    pub bound: u64,
}

impl TraceRecord {
    pub fn export_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{:016x}\t{}",
            self.event_idx, self.sender, self.receiver, self.payload_hash, self.label
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct Trace {
    mode: TraceMode,
    digest: u64,
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new(mode: TraceMode) -> Self {
        Trace {
            mode,
            digest: 0,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, rec: TraceRecord) {
        let mut d = derive_seed(self.digest, rec.event_idx);
        d = derive_seed(d, (rec.sender.0 as u64) << 32 | rec.receiver.0 as u64);
        self.digest = derive_seed(d, rec.payload_hash);
        if self.mode == TraceMode::Full {
            self.records.push(rec);
        }
    }

    pub fn digest(&self) -> u64 {
        self.digest
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    /// Tab-separated export, one line per delivery.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let _ = writeln!(out, "{}", r.export_line());
        }
        out
    }
}

/// Deliveries whose wait exceeded their bound.
pub fn fairness_violations(records: &[TraceRecord]) -> Vec<&TraceRecord> {
    records
        .iter()
        .filter(|r| r.bound != u64::MAX && r.event_idx - r.enqueued_at > r.bound)
        .collect()
}

/// Pairs of deliveries on one channel that came out of send order.
pub fn fifo_violations(records: &[TraceRecord]) -> Vec<(&TraceRecord, &TraceRecord)> {
    let mut last: std::collections::HashMap<(NodeId, NodeId), &TraceRecord> = Default::default();
    let mut bad = Vec::new();
    for r in records {
        if let Some(prev) = last.insert((r.sender, r.receiver), r) {
            if prev.seq > r.seq {
                bad.push((prev, r));
            }
        }
    }
    bad
}
