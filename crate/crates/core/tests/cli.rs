use std::path::PathBuf;
use std::process::{Command, Output};

use asyncba::harness::RunConfig;

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asyncba"))
        .args(args)
        .current_dir(configs_dir())
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn shipped_configs_load_and_validate() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.prepare().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
            seen += 1;
        }
    }
    assert!(seen >= 4);
}

#[test]
fn suite_passes_and_is_repeatable() {
    let args = ["suite", "w5_agreement.toml", "--trials", "4"];
    let a = cli(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let text = stdout(&a);
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().last().unwrap().starts_with("aggregate trials 4 decided 4"));
    assert_eq!(stdout(&cli(&args)), text);
}

#[test]
fn negative_scenario_exit_codes() {
    let plain = cli(&["scenario", "purify_negative", "--trials", "3"]);
    assert_eq!(plain.status.code(), Some(1));
    let expected = cli(&["scenario", "purify_negative", "--trials", "3", "--expect-violation"]);
    assert_eq!(expected.status.code(), Some(0));
    let positive = cli(&["scenario", "purify_positive", "--trials", "2", "--expect-violation"]);
    assert_eq!(positive.status.code(), Some(1));
}

#[test]
fn config_errors_exit_2() {
    let unknown = cli(&["scenario", "E9"]);
    assert_eq!(unknown.status.code(), Some(2));
    let missing = cli(&["run", "no_such_file.toml"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("no_such_file.toml"));
}

#[test]
fn connectivity_of_a_graph_file() {
    let o = cli(&["connectivity", "graphs/wheel6.txt"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("n 6 edges 10 connectivity 3\n"), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("path ")).count(), 3);
}

#[test]
fn trace_and_run_outputs() {
    let o = cli(&["trace", "wheel6_broadcast.toml", "--format", "jsonlines"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["event"].is_u64() && v["hash"].is_string());
    }
    assert!(text.lines().count() > 100);

    let out = tempfile::NamedTempFile::new().unwrap();
    let o = cli(&["run", "w5_agreement.toml", "--trial", "3", "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let written = std::fs::read_to_string(out.path()).unwrap();
    // trial line, aggregate, then one decision line per honest node
    assert_eq!(written.lines().count(), 2 + 4);
}
