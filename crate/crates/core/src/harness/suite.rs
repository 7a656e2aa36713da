use super::config::RunConfig;
use super::report::SuiteReport;
use super::run::{execute, TrialError};
use crate::simnet::TraceMode;

/// How a suite spreads its trials.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Serial,
    /// Trials on the rayon pool; same as `Serial` without the `parallel` feature.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Serial
        }
    }
}

pub fn run_suite(cfg: &RunConfig) -> Result<SuiteReport, TrialError> {
    run_suite_with(cfg, cfg.trials, Exec::default())
}

pub fn run_suite_with(cfg: &RunConfig, trials: u64, exec: Exec) -> Result<SuiteReport, TrialError> {
    let prep = cfg.prepare()?;
    let one = |t: u64| execute(&prep, t, TraceMode::Digest, None).map(|e| e.report);
    let reports: Result<Vec<_>, _> = match exec {
        Exec::Serial => (0..trials).map(one).collect(),
        Exec::Parallel => parallel_map(trials, &one),
    };
    Ok(SuiteReport::new(cfg.name.clone(), reports?))
}

#[cfg(feature = "parallel")]
fn parallel_map<T, E, F>(trials: u64, f: &F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(u64) -> Result<T, E> + Sync,
{
    use rayon::prelude::*;
    (0..trials).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, E, F>(trials: u64, f: &F) -> Result<Vec<T>, E>
where
    F: Fn(u64) -> Result<T, E>,
{
    (0..trials).map(f).collect()
}
