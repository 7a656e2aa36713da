//! Trial configuration, execution, auditing and the scenario library.

pub mod audit;
pub mod config;
pub mod report;
pub mod run;
pub mod scenario;
pub mod suite;

pub use audit::Violations;
pub use config::{ConfigError, Inputs, Prepared, RunConfig, TopologySource, Workload};
pub use report::{Aggregate, Format, NodeOutcome, SuiteReport, TrialReport, TrialStatus};
pub use run::{execute, run_trial, trial_seed, Execution, TrialError, World};
pub use scenario::{scenario, split_brain_isomorphism, Isomorphism, Scenario};
pub use suite::{run_suite, run_suite_with, Exec};
