use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::audit::Violations;
use crate::graph::NodeId;
use crate::rbcast::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    /// Every honest node decided.
    Decided,
    /// Nothing left to deliver.
    Quiescent,
    EventBudget,
    PhaseBudget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeOutcome {
    /// Id in the simulated network.
    pub node: NodeId,
    pub honest: bool,
    pub input: Option<Value>,
    pub decision: Option<(u32, Value)>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageCounts {
    pub sent: u64,
    pub delivered: u64,
    pub rejected: u64,
    pub stored_peak: u64,
    pub discarded: u64,
    pub accepted: u64,
    pub forgeries: u64,
    /// Deliveries between split-brain instances, outside the network.
    pub internal: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: u64,
    pub seed: u64,
    pub status: TrialStatus,
    pub events: u64,
    pub nodes: Vec<NodeOutcome>,
    /// Phase of the latest honest decision.
    pub last_decision_phase: Option<u32>,
    /// Furthest phase any honest node reached.
    pub max_phase: u32,
    pub coin_tosses: u64,
    pub messages: MessageCounts,
    pub violations: Violations,
    pub trace_digest: String,
}

impl TrialReport {
    pub fn honest(&self) -> impl Iterator<Item = &NodeOutcome> {
        self.nodes.iter().filter(|o| o.honest)
    }

    pub fn all_honest_decided(&self) -> bool {
        self.honest().all(|o| o.decision.is_some())
    }

    pub fn honest_values(&self) -> Vec<Value> {
        let mut v: Vec<Value> = self.honest().filter_map(|o| o.decision.map(|d| d.1)).collect();
        v.sort();
        v.dedup();
        v
    }

    /// `node phase value` for every decision, honest or not.
    pub fn decision_lines(&self) -> Vec<String> {
        self.nodes
            .iter()
            .filter_map(|o| o.decision.map(|(p, v)| format!("{} {} {}", o.node, p, v)))
            .collect()
    }

    pub fn text_line(&self) -> String {
        let decisions: Vec<String> = self
            .nodes
            .iter()
            .map(|o| match (o.honest, o.decision) {
                (false, _) => "B".to_string(),
                (true, Some((p, v))) => format!("{v}@{p}"),
                (true, None) => "-".to_string(),
            })
            .collect();
        let viol = self.violations.names();
        format!(
            "trial {} seed {:016x} {:?} events {} decisions [{}] violations [{}] trace {}",
            self.trial,
            self.seed,
            self.status,
            self.events,
            decisions.join(" "),
            viol.join(","),
            self.trace_digest
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: u64,
    pub decided_trials: u64,
    pub decision_rate: f64,
    /// Mean of the last decision phase over fully decided trials.
    pub mean_phases: f64,
    pub total_events: u64,
    pub violation_trials: u64,
    pub violations: BTreeMap<String, u64>,
    pub statuses: BTreeMap<String, u64>,
}

impl Aggregate {
    /// Order-independent summary of `reports`.
    pub fn of(reports: &[TrialReport]) -> Self {
        let mut a = Aggregate {
            trials: reports.len() as u64,
            ..Aggregate::default()
        };
        let mut phase_sum = 0u64;
        for r in reports {
            a.total_events += r.events;
            *a.statuses.entry(format!("{:?}", r.status)).or_default() += 1;
            if r.all_honest_decided() {
                a.decided_trials += 1;
                phase_sum += r.last_decision_phase.unwrap_or(0) as u64;
            }
            if r.violations.any() {
                a.violation_trials += 1;
            }
            for name in r.violations.names() {
                *a.violations.entry(name.to_string()).or_default() += 1;
            }
        }
        if a.trials > 0 {
            a.decision_rate = a.decided_trials as f64 / a.trials as f64;
        }
        if a.decided_trials > 0 {
            a.mean_phases = phase_sum as f64 / a.decided_trials as f64;
        }
        a
    }

    pub fn text(&self) -> String {
        let mut s = format!(
            "aggregate trials {} decided {} rate {:.4} mean_phases {:.3} events {} violation_trials {}",
            self.trials, self.decided_trials, self.decision_rate, self.mean_phases, self.total_events, self.violation_trials
        );
        for (k, v) in &self.violations {
            let _ = write!(s, " {k}={v}");
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub trials: Vec<TrialReport>,
    pub aggregate: Aggregate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    JsonLines,
}

impl SuiteReport {
    pub fn new(name: String, mut trials: Vec<TrialReport>) -> Self {
        trials.sort_by_key(|t| t.trial);
        let aggregate = Aggregate::of(&trials);
        SuiteReport { name, trials, aggregate }
    }

    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        for t in &self.trials {
            match format {
                Format::Text => out.push_str(&t.text_line()),
                Format::JsonLines => out.push_str(&serde_json::to_string(t).expect("report serializes")),
            }
            out.push('\n');
        }
        match format {
            Format::Text => out.push_str(&self.aggregate.text()),
            Format::JsonLines => {
                let v = serde_json::json!({ "name": self.name, "aggregate": self.aggregate });
                out.push_str(&v.to_string());
            }
        }
        out.push('\n');
        out
    }
}
