use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hvi::report::{lookup, section};
use hvi::{echo_text, parse_config};
use proptest::prelude::*;

fn hvi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hvi")).args(args).output().unwrap()
}

fn run_with(config: &str, extra: &[&str]) -> (Output, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    fs::write(&path, config).unwrap();
    let out = dir.path().join("out");
    let mut args = vec!["--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    (hvi(&args), dir)
}

fn report(dir: &Path) -> String {
    fs::read_to_string(dir.join("out").join("report.txt")).unwrap()
}

#[test]
fn default_run_writes_certified_artifacts() {
    let (out, dir) = run_with("", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = report(dir.path());
    assert_eq!(lookup(&text, "run", "status"), Some("success"));
    assert_eq!(lookup(&text, "run", "exit_code"), Some("0"));
    for i in 1..=2 {
        let csv = fs::read_to_string(dir.path().join("out").join(format!("solution_{i}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("z,x,r,dj_lower,dj_upper"));
        let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
        assert_eq!(rows.len(), 512);
        for row in &rows {
            assert!(row[3] <= row[4], "{row:?}");
        }
    }
    assert!(dir.path().join("out").join("timings.txt").exists());
    assert!(!text.contains("seconds"));
}

#[test]
fn failed_hypotheses_exit_with_two_and_a_witness() {
    let (out, dir) = run_with("potential.mu = 6\n", &[]);
    assert_eq!(out.status.code(), Some(2));
    let text = report(dir.path());
    assert_eq!(lookup(&text, "hypotheses", "H(j)(v).verdict"), Some("fail"));
    let gap: f64 = lookup(&text, "hypotheses", "H(j)(v).witness.gap").unwrap().parse().unwrap();
    assert_eq!(gap, 5.0);
    assert_eq!(lookup(&text, "run", "failed_stage"), Some("hypotheses"));
}

#[test]
fn check_only_stops_after_the_hypotheses() {
    let (out, dir) = run_with("", &["--check-only"]);
    assert_eq!(out.status.code(), Some(0));
    let text = report(dir.path());
    assert_eq!(lookup(&text, "run", "check_only"), Some("true"));
    assert!(section(&text, "hypotheses").is_some());
    assert!(section(&text, "solution.1").is_none());
}

#[test]
fn configuration_errors_exit_with_one() {
    let (out, _dir) = run_with("solver.k = 2\nsolver.m = 3\n", &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("m <= k"));

    let (out, _dir) = run_with("solver.k = 2\nsolver.kk = 3\n", &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let (out, _dir) = run_with("", &["--tol-inner", "-1"]);
    assert_eq!(out.status.code(), Some(1));

    assert_eq!(hvi(&["--no-such-flag"]).status.code(), Some(1));
    assert_eq!(hvi(&["--config", "/nonexistent/run.conf"]).status.code(), Some(1));
    assert_eq!(hvi(&["--help"]).status.code(), Some(0));
}

#[test]
fn flags_override_the_file() {
    let (out, dir) = run_with("solver.seed = 3\n", &["--seed", "11", "--tol-residual", "1e-7", "--check-only"]);
    assert_eq!(out.status.code(), Some(0));
    let text = report(dir.path());
    assert_eq!(lookup(&text, "config", "solver.seed"), Some("11"));
    assert_eq!(lookup(&text, "config", "tol.residual"), Some("1e-7"));
}

#[test]
fn config_echo_parses_back() {
    let (out, dir) = run_with("domain.kind = rectangle\ndomain.lx = 2\nsolver.k = 2\npotential.mu = 1.25\n", &["--check-only"]);
    assert_eq!(out.status.code(), Some(0));
    let text = report(dir.path());
    let echoed = section(&text, "config").unwrap().join("\n");
    let parsed = parse_config(&echoed).unwrap();
    assert_eq!(echo_text(&parsed), echoed + "\n");
}

fn potential_lines() -> impl Strategy<Value = String> {
    prop_oneof![
        (0.1f64..2.9, 0.01f64..1.0, 0.01f64..1.0).prop_map(|(mu, a, b)| format!(
            "potential.family = example\npotential.mu = {mu}\npotential.slope_neg = {}\npotential.slope_pos = {}\n",
            a * mu,
            b * mu
        )),
        (0.1f64..3.0, 0.0f64..2.0)
            .prop_map(|(xi, c)| format!("potential.family = max\npotential.xi = {xi}\npotential.c = {c}\n")),
        (-2.0f64..2.0).prop_map(|e| format!("potential.family = quadratic\npotential.epsilon = {e}\n")),
        Just("potential.family = zero\n".to_string()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn echo_round_trips(
        pot in potential_lines(),
        k in 1usize..5,
        seed in any::<u64>(),
        tol in 1e-12f64..1e-3,
        length in 0.5f64..10.0,
        n_trunc in 4usize..200,
    ) {
        let text = format!(
            "domain.kind = interval\ndomain.length = {length}\nsolver.k = {k}\nsolver.n_trunc = {n_trunc}\nsolver.seed = {seed}\ntol.inner = {tol}\n{pot}"
        );
        let run = parse_config(&text).unwrap();
        let again = parse_config(&echo_text(&run)).unwrap();
        prop_assert_eq!(&run, &again);
        prop_assert_eq!(run.solver.m, k);
    }
}
