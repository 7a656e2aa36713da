use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{AdversarySpec, Strategy};
use crate::graph::{
    build_double_cover, gen_topology, read_graph, CutPartition, GenSpec, GraphError, NodeId, Topology,
};
use crate::node::StackDepth;
use crate::purify::{PurifyConfig, SearchMode, MAX_PROTOCOL_NODES};
use crate::rbcast::Value;
use crate::seed::derive_path;
use crate::simnet::SchedulerPolicy;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("topology: {0}")]
    Graph(#[from] GraphError),
}

fn invalid<T>(field: &str, reason: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum TopologySource {
    Generator { spec: GenSpec },
    /// Graph file; relative paths resolve against the config file.
    File { path: PathBuf },
    Edges { n: usize, edges: Vec<(u32, u32)> },
    /// Run directly on the double cover of `base` for the trial's partition.
    DoubleCover { base: Box<TopologySource> },
}

/// Per-node input bits.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inputs {
    All0,
    #[default]
    All1,
    /// Lower half of the ids 0, upper half 1.
    Split,
    /// Fair bits; without a seed they derive from the trial seed.
    Random {
        #[serde(default)]
        seed: Option<u64>,
    },
    Bits(Vec<u8>),
    /// `X` gets 0, every other side 1.
    CutSides,
    /// Double-cover copy index.
    CopyIndexed,
}

/// What the honest nodes do in a trial.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Workload {
    /// Every node purify-sends one message.
    Purify,
    /// Every node reliably broadcasts its input as round 1.
    Broadcast,
    #[default]
    Agreement,
}

impl Workload {
    pub fn depth(self) -> StackDepth {
        match self {
            Workload::Purify => StackDepth::Purify,
            Workload::Broadcast => StackDepth::Broadcast,
            Workload::Agreement => StackDepth::Agreement,
        }
    }
}

pub const DEFAULT_MAX_EVENTS: u64 = 5_000_000;
pub const DEFAULT_MAX_PHASES: u32 = 200;

fn default_max_events() -> u64 {
    DEFAULT_MAX_EVENTS
}

fn default_max_phases() -> u32 {
    DEFAULT_MAX_PHASES
}

fn default_trials() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub name: String,
    pub topology: TopologySource,
    pub f: usize,
    /// Expected node count; checked against the built topology when set.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub inputs: Inputs,
    #[serde(default)]
    pub workload: Workload,
    #[serde(default)]
    pub adversary: AdversarySpec,
    /// Needed by split brain, cut-side inputs and double-cover runs. Defaults
    /// to the contiguous layout of a cut-partition generator.
    #[serde(default)]
    pub partition: Option<CutPartition>,
    #[serde(default)]
    pub scheduler: SchedulerPolicy,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_events")]
    pub max_events: u64,
    #[serde(default = "default_max_phases")]
    pub max_phases: u32,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub purify: PurifyOptions,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PurifyOptions {
    #[serde(default)]
    pub store_cap: Option<usize>,
    #[serde(default)]
    pub greedy: bool,
}

/// A config with its topology built and checked.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub cfg: RunConfig,
    /// The graph the protocol runs on.
    pub g: Topology,
    /// The simulated network; differs from `g` only for double-cover runs.
    pub net: Topology,
    pub partition: Option<CutPartition>,
    pub cover: bool,
}

impl RunConfig {
    pub fn new(topology: TopologySource, f: usize) -> Self {
        RunConfig {
            name: String::new(),
            topology,
            f,
            n: None,
            inputs: Inputs::default(),
            workload: Workload::default(),
            adversary: AdversarySpec::none(),
            partition: None,
            scheduler: SchedulerPolicy::default(),
            seed: 0,
            max_events: DEFAULT_MAX_EVENTS,
            max_phases: DEFAULT_MAX_PHASES,
            trials: 1,
            purify: PurifyOptions::default(),
        }
    }

    pub fn generated(spec: GenSpec, f: usize) -> Self {
        RunConfig::new(TopologySource::Generator { spec }, f)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Loads a config file, resolving graph paths against its directory.
    pub fn load(path: &FsPath) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = RunConfig::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.topology.resolve(dir);
        }
        Ok(cfg)
    }

    pub fn purify_config(&self) -> PurifyConfig {
        let mut p = PurifyConfig::new(self.f);
        p.store_cap = self.purify.store_cap;
        if self.purify.greedy {
            p.search = SearchMode::Greedy;
        }
        p
    }

    fn default_partition(&self) -> Option<CutPartition> {
        let mut src = &self.topology;
        while let TopologySource::DoubleCover { base } = src {
            src = base;
        }
        match src {
            TopologySource::Generator {
                spec: GenSpec::CutPartition { x, y, r, t, .. },
            } => Some(CutPartition::contiguous(*x, *y, *r, *t)),
            _ => None,
        }
    }

    /// Builds the topology and checks every field.
    pub fn prepare(&self) -> Result<Prepared, ConfigError> {
        if self.trials == 0 {
            return invalid("trials", "must be at least 1");
        }
        if self.max_events == 0 {
            return invalid("max_events", "must be positive");
        }
        let (g, cover) = match &self.topology {
            TopologySource::DoubleCover { base } => (base.build(self.seed)?, true),
            other => (other.build(self.seed)?, false),
        };
        let n = g.n();
        if let Some(want) = self.n {
            if want != n {
                return invalid("n", format!("config says {want}, topology has {n}"));
            }
        }
        if n > MAX_PROTOCOL_NODES {
            return invalid("topology", format!("{n} nodes exceeds the limit of {MAX_PROTOCOL_NODES}"));
        }
        if 3 * self.f >= n {
            return invalid("f", format!("need n >= 3f + 1, got n = {n}, f = {}", self.f));
        }
        let byz = &self.adversary.byzantine;
        if byz.len() > self.f {
            return invalid("adversary.byzantine", format!("{} nodes exceeds f = {}", byz.len(), self.f));
        }
        for (i, u) in byz.iter().enumerate() {
            if u.index() >= n {
                return invalid("adversary.byzantine", format!("node {u} out of range"));
            }
            if byz[..i].contains(u) {
                return invalid("adversary.byzantine", format!("node {u} listed twice"));
            }
        }
        for o in &self.adversary.overrides {
            if !byz.contains(&o.node) {
                return invalid("adversary.overrides", format!("node {} is not byzantine", o.node));
            }
        }
        let partition = self.partition.clone().or_else(|| self.default_partition());
        let split = byz.iter().any(|&u| self.adversary.strategy_of(u) == Some(&Strategy::SplitBrain));
        let needs_partition = split || cover || self.inputs == Inputs::CutSides;
        if needs_partition {
            let Some(part) = &partition else {
                return invalid("partition", "required by this topology, input pattern or adversary");
            };
            if let Err(e) = part.validate(&g, Some(self.f)) {
                return invalid("partition", e.to_string());
            }
        }
        if split {
            let part = partition.as_ref().expect("checked");
            let all = byz.iter().all(|&u| self.adversary.strategy_of(u) == Some(&Strategy::SplitBrain));
            let set: std::collections::BTreeSet<NodeId> = byz.iter().copied().collect();
            if !all || set != part.r {
                return invalid("adversary", "split brain needs the Byzantine set to be exactly R");
            }
            if self.workload != Workload::Agreement {
                return invalid("workload", "split brain runs the agreement workload");
            }
        }
        if cover && !byz.is_empty() {
            return invalid("adversary", "double-cover runs are all honest");
        }
        if (self.inputs == Inputs::CopyIndexed) != cover {
            return invalid("inputs", "copy-indexed inputs go with double-cover topologies only");
        }
        if let Inputs::Bits(bits) = &self.inputs {
            if bits.len() != n {
                return invalid("inputs", format!("{} bits for {n} nodes", bits.len()));
            }
            if bits.iter().any(|&b| b > 1) {
                return invalid("inputs", "bits must be 0 or 1");
            }
        }
        if let SchedulerPolicy::Adversarial {
            priority: crate::simnet::Priority::Starve(v) | crate::simnet::Priority::Rush(v),
            ..
        } = &self.scheduler
        {
            let net_n = if cover { 2 * n } else { n };
            if v.iter().any(|u| u.index() >= net_n) {
                return invalid("scheduler.priority", "node out of range");
            }
        }
        let net = if cover {
            build_double_cover(&g, partition.as_ref().expect("checked"))?
        } else {
            g.clone()
        };
        Ok(Prepared {
            cfg: self.clone(),
            g,
            net,
            partition,
            cover,
        })
    }
}

impl TopologySource {
    pub fn build(&self, seed: u64) -> Result<Topology, ConfigError> {
        match self {
            TopologySource::Generator { spec } => Ok(gen_topology(spec, derive_path(seed, &[3]))?),
            TopologySource::File { path } => Ok(read_graph(path)?),
            TopologySource::Edges { n, edges } => Ok(Topology::new(
                *n,
                edges.iter().map(|&(u, v)| (NodeId(u), NodeId(v))),
            )?),
            TopologySource::DoubleCover { .. } => invalid("topology", "double covers do not nest"),
        }
    }

    fn resolve(&mut self, dir: &FsPath) {
        match self {
            TopologySource::File { path } if path.is_relative() => *path = dir.join(&*path),
            TopologySource::DoubleCover { base } => base.resolve(dir),
            _ => {}
        }
    }
}

impl Inputs {
    /// Input of protocol node `h` in the simulated network.
    pub fn value(&self, prep: &Prepared, trial_seed: u64, h: NodeId) -> Value {
        let n = prep.g.n();
        match self {
            Inputs::All0 => Value::Zero,
            Inputs::All1 => Value::One,
            Inputs::Split => Value::bit((h.index() >= n / 2) as u8),
            Inputs::Random { seed } => {
                let s = seed.unwrap_or_else(|| derive_path(trial_seed, &[4]));
                Value::bit((derive_path(s, &[h.0 as u64]) & 1) as u8)
            }
            Inputs::Bits(bits) => Value::bit(bits[h.index()]),
            Inputs::CutSides => match prep.partition.as_ref().and_then(|p| p.side(h)) {
                Some(crate::graph::Side::X) => Value::Zero,
                _ => Value::One,
            },
            Inputs::CopyIndexed => Value::bit((h.index() >= n) as u8),
        }
    }
}
