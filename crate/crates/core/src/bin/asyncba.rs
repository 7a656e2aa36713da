use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use asyncba::graph::{connectivity_witness, read_graph, vertex_connectivity};
use asyncba::harness::{
    execute, run_suite_with, scenario, split_brain_isomorphism, Exec, Format, RunConfig, Scenario, SuiteReport,
    TrialError,
};
use asyncba::simnet::{FairnessBound, Priority, SchedulerPolicy, TraceMode};

#[derive(Parser)]
#[command(version, about = "Asynchronous Byzantine agreement simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one trial of a config file.
    Run {
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Run every trial of a config file.
    Suite {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a named scenario: E1, E2, E3, E4, purify_positive, purify_negative.
    Scenario {
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// Vertex connectivity of a graph file and a witness pair's disjoint paths.
    Connectivity { graph: PathBuf },
    /// Delivery trace of one trial.
    Trace {
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchedArg {
    Fifo,
    Random,
    Adversarial,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Jsonlines,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, value_enum)]
    scheduler: Option<SchedArg>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    /// Succeed only if every trial trips an audit flag.
    #[arg(long)]
    expect_violation: bool,
}

impl Common {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.scheduler {
            cfg.scheduler = match s {
                SchedArg::Fifo => SchedulerPolicy::Fifo,
                SchedArg::Random => SchedulerPolicy::Random { seed: None },
                SchedArg::Adversarial => SchedulerPolicy::Adversarial {
                    bound: FairnessBound::default(),
                    priority: Priority::default(),
                },
            };
        }
    }

    fn format(&self) -> Format {
        match self.format {
            FormatArg::Text => Format::Text,
            FormatArg::Jsonlines => Format::JsonLines,
        }
    }

    fn emit(&self, text: &str) -> Result<(), String> {
        match &self.out {
            Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

enum Failure {
    Violation,
    Config(String),
}

impl From<TrialError> for Failure {
    fn from(e: TrialError) -> Self {
        Failure::Config(e.to_string())
    }
}

/// 0 when the outcome matches the expectation, 1 otherwise.
fn verdict(violations: &[bool], expect: bool) -> Result<(), Failure> {
    let ok = if expect {
        !violations.is_empty() && violations.iter().all(|&v| v)
    } else {
        violations.iter().all(|&v| !v)
    };
    if ok {
        Ok(())
    } else {
        Err(Failure::Violation)
    }
}

fn trial_flags(s: &SuiteReport) -> Vec<bool> {
    s.trials.iter().map(|t| t.violations.any()).collect()
}

fn load(path: &Path, common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(path).map_err(|e| Failure::Config(e.to_string()))?;
    common.apply(&mut cfg);
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Run { config, trial, common } => {
            let cfg = load(&config, &common)?;
            let prep = cfg.prepare().map_err(|e| Failure::Config(e.to_string()))?;
            let exec = execute(&prep, trial, TraceMode::Digest, None).map_err(TrialError::from)?;
            let report = SuiteReport::new(cfg.name.clone(), vec![exec.report]);
            let mut text = report.render(common.format());
            if matches!(common.format, FormatArg::Text) {
                for line in report.trials[0].decision_lines() {
                    text.push_str(&line);
                    text.push('\n');
                }
            }
            common.emit(&text).map_err(Failure::Config)?;
            verdict(&trial_flags(&report), common.expect_violation)
        }
        Cmd::Suite { config, common } => {
            let cfg = load(&config, &common)?;
            let report = run_suite_with(&cfg, cfg.trials, Exec::default())?;
            common.emit(&report.render(common.format())).map_err(Failure::Config)?;
            verdict(&trial_flags(&report), common.expect_violation)
        }
        Cmd::Scenario { name, common } => {
            let mut cfg = scenario(&name).map_err(|e| Failure::Config(e.to_string()))?;
            common.apply(&mut cfg);
            let which: Scenario = name.parse().map_err(|e: asyncba::harness::ConfigError| Failure::Config(e.to_string()))?;
            let report = run_suite_with(&cfg, cfg.trials, Exec::default())?;
            let mut flags = trial_flags(&report);
            let mut text = report.render(common.format());
            match which {
                Scenario::E3 => {
                    let iso = split_brain_isomorphism(&cfg, 0)?;
                    text.push_str(&format!(
                        "isomorphism composite {} cover {} matched {} decisions_match {}\n",
                        iso.composite_len, iso.cover_len, iso.matched, iso.decisions_match
                    ));
                    if !iso.holds() {
                        flags.iter_mut().for_each(|f| *f = !common.expect_violation);
                    }
                }
                Scenario::E4 => {
                    let base_n = cfg.prepare().map_err(|e| Failure::Config(e.to_string()))?.g.n();
                    for (t, f) in report.trials.iter().zip(flags.iter_mut()) {
                        *f = !asyncba::harness::scenario::cover_decisions_follow_copies(t, base_n);
                    }
                }
                _ => {}
            }
            common.emit(&text).map_err(Failure::Config)?;
            verdict(&flags, common.expect_violation)
        }
        Cmd::Connectivity { graph } => {
            let g = read_graph(&graph).map_err(|e| Failure::Config(e.to_string()))?;
            let k = vertex_connectivity(&g);
            println!("n {} edges {} connectivity {}", g.n(), g.edge_count(), k);
            if let Some((_, u, v, paths)) = connectivity_witness(&g) {
                println!("witness {u} {v}");
                for p in &paths {
                    println!("path {p}");
                }
            }
            Ok(())
        }
        Cmd::Trace { config, trial, common } => {
            let cfg = load(&config, &common)?;
            let prep = cfg.prepare().map_err(|e| Failure::Config(e.to_string()))?;
            let exec = execute(&prep, trial, TraceMode::Full, None).map_err(TrialError::from)?;
            let text = match common.format() {
                Format::Text => exec.trace.export(),
                Format::JsonLines => {
                    let mut s = String::new();
                    for r in exec.trace.records() {
                        let v = serde_json::json!({
                            "event": r.event_idx,
                            "sender": r.sender,
                            "receiver": r.receiver,
                            "hash": format!("{:016x}", r.payload_hash),
                            "label": r.label,
                            "seq": r.seq,
                        });
                        s.push_str(&v.to_string());
                        s.push('\n');
                    }
                    s
                }
            };
            common.emit(&text).map_err(Failure::Config)?;
            verdict(&[exec.report.violations.any()], common.expect_violation)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Violation) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
