//! Black-box tests of the `poscon` binary: exit codes, file outputs, and the
//! trace/summary contracts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use positive_consensus::scenario::bundled_example;

fn poscon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poscon"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Fresh scratch directory for one test.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("poscon-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn bundled_path() -> String {
    format!(
        "{}/scenarios/paper_example.toml",
        env!("CARGO_MANIFEST_DIR")
    )
}

fn write_scenario(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn check_passes_on_the_bundled_scenario() {
    let out = poscon(&["check", &bundled_path()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("RESULT: PASS"));
    assert!(text.contains("mu_max 0.333333"));
    assert!(text.contains("observer loop"), "all six gains are verified");
}

#[test]
fn check_rejects_an_inadmissible_coupling_gain() {
    let dir = scratch("badmu");
    let path = write_scenario(
        &dir,
        "badmu.toml",
        &bundled_example().replace("mu = 0.3", "mu = 0.4"),
    );
    let out = poscon(&["check", &path]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("admissible interval"));
}

#[test]
fn check_reports_assumption_failures_with_exit_2() {
    let dir = scratch("unitradius");
    // leader radius 1.01 parses fine but fails the assumption report
    let path = write_scenario(
        &dir,
        "leader.toml",
        &bundled_example().replace("A0 = [[1.0, 0.5], [0.0, 1.0]]", "A0 = [[1.01, 0.5], [0.0, 1.0]]"),
    );
    let out = poscon(&["check", &path]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("RESULT: FAIL"));
    assert!(stdout(&out).contains("spectral radius"));
}

#[test]
fn check_rejects_malformed_toml_and_unknown_keys() {
    let dir = scratch("badtoml");
    let path = write_scenario(&dir, "broken.toml", "mode = \"state-feedback\"\nhorizon
");
    let out = poscon(&["check", &path]);
    assert_eq!(code(&out), 2);

    let path = write_scenario(
        &dir,
        "unknown.toml",
        &bundled_example().replace("horizon = 300", "horizon = 300\nturbo = true"),
    );
    let out = poscon(&["check", &path]);
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_file_is_exit_1() {
    let out = poscon(&["check", "/nonexistent/scenario.toml"]);
    assert_eq!(code(&out), 1);
    let out = poscon(&["run", "/nonexistent/scenario.toml", "--out", "/tmp/never"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn run_writes_the_full_output_set() {
    let dir = scratch("run");
    let out_dir = dir.join("out");
    let out = poscon(&["run", &bundled_path(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    for f in [
        "trace.csv",
        "summary.json",
        "observer_tracking.csv",
        "outputs.csv",
        "agent_states.csv",
    ] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }

    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k,sigma,agent,x_1,x_2,w_1,w_2,eta_1,eta_2,u_1,y_1,e_1"
    );
    // horizon 300: 301 steps x (leader + 3 agents)
    assert_eq!(lines.count(), 301 * 4);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["mode"], "state-feedback");
    assert_eq!(summary["horizon"], 300);
    assert_eq!(summary["positivity"]["violation_count"], 0);
    assert_eq!(summary["positivity"]["pass"], true);
    assert_eq!(summary["convergence"]["converged"], true);
    assert_eq!(summary["assumptions"]["graph_constants"]["delta"], 3.0);
}

#[test]
fn summary_values_recompute_from_the_trace() {
    let dir = scratch("recompute");
    let out_dir = dir.join("out");
    let out = poscon(&["run", &bundled_path(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0);

    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();

    // min entry over state and estimate columns, and per-step error from the
    // e column, must reproduce the summary exactly
    let mut min_entry = f64::INFINITY;
    let mut errs = vec![0.0f64; 301];
    for line in trace.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let k: usize = cells[0].parse().unwrap();
        for cell in &cells[3..7] {
            if !cell.is_empty() {
                min_entry = min_entry.min(cell.parse::<f64>().unwrap());
            }
        }
        if cells[2] != "leader" {
            errs[k] = errs[k].max(cells[11].parse::<f64>().unwrap().abs());
        }
    }
    assert_eq!(min_entry, summary["positivity"]["min_entry"].as_f64().unwrap());
    let tail = errs.len().div_ceil(10);
    let tail_error = errs[errs.len() - tail..].iter().copied().fold(0.0, f64::max);
    assert_eq!(
        tail_error,
        summary["convergence"]["tail_error"].as_f64().unwrap()
    );
}

#[test]
fn run_supports_mode_horizon_and_zero_horizon_edge() {
    let dir = scratch("modes");
    let out_dir = dir.join("obs");
    let out = poscon(&[
        "run",
        &bundled_path(),
        "--out",
        out_dir.to_str().unwrap(),
        "--mode",
        "observer-only",
        "--horizon",
        "0",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    // observer-only writes no plant plot files
    assert!(out_dir.join("observer_tracking.csv").exists());
    assert!(!out_dir.join("outputs.csv").exists());
    assert!(!out_dir.join("agent_states.csv").exists());

    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines.len(), 1 + 4, "horizon 0 records exactly the initial state");
    let leader: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(leader[0], "0");
    assert_ne!(leader[10], "", "leader output recorded");
    let agent: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(agent[3], "", "no plant state in observer-only mode");
    assert_ne!(agent[5], "", "estimate recorded");
    assert_eq!(agent[9], "", "no input at the final step");
}

#[test]
fn run_exit_codes_separate_validation_from_invariant_violations() {
    let dir = scratch("codes");
    let neg = write_scenario(
        &dir,
        "neg.toml",
        &bundled_example().replace("x0 = [2.0, 1.0]", "x0 = [-2.0, 1.0]"),
    );
    let out_dir = dir.join("out");
    // without the override the negative initial state is a validation failure
    let out = poscon(&["run", &neg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nonnegative"));
    // with it, the run proceeds and honestly reports the invariant violation
    let out = poscon(&[
        "run",
        &neg,
        "--out",
        out_dir.to_str().unwrap(),
        "--override-assumptions",
    ]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("invariant violation"));
    // the trace is still written for inspection
    assert!(out_dir.join("trace.csv").exists());
}

#[test]
fn seeded_runs_reproduce_and_differ_across_seeds() {
    let dir = scratch("seeds");
    let random = write_scenario(
        &dir,
        "random.toml",
        &bundled_example().replace(
            "x0 = [2.0, 1.0]\nx = [[3.0, 1.0], [2.0, 2.0], [1.0, 4.0]]",
            "kind = \"random-nonnegative\"",
        ),
    );
    let run = |out: &Path, seed: &str| {
        let o = poscon(&[
            "run",
            &random,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
            "--horizon",
            "20",
        ]);
        assert_eq!(code(&o), 0, "stderr: {}", stderr(&o));
        fs::read_to_string(out.join("trace.csv")).unwrap()
    };
    let a = run(&dir.join("a"), "11");
    let b = run(&dir.join("b"), "11");
    let c = run(&dir.join("c"), "12");
    assert_eq!(a, b, "same seed, same trace");
    assert_ne!(a, c, "different seed, different trace");
}

#[test]
fn synthesize_completes_a_stripped_scenario() {
    let dir = scratch("synth");
    let mut text = bundled_example()
        .replace("mu = 0.3", "mu = \"auto\"")
        .replace("mode = \"state-feedback\"", "mode = \"output-feedback\"");
    // strip every gain line
    text = text
        .lines()
        .filter(|l| !l.starts_with("K1 ") && !l.starts_with("K2 ") && !l.starts_with("K3 "))
        .collect::<Vec<_>>()
        .join("\n");
    let input = write_scenario(&dir, "stripped.toml", &text);
    let out_path = dir.join("completed.toml");

    let out = poscon(&["synthesize", &input, "--out", out_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("synthesized"));

    let completed = fs::read_to_string(&out_path).unwrap();
    assert_eq!(completed.matches("K1 = ").count(), 3);
    assert_eq!(completed.matches("K2 = ").count(), 3);
    assert_eq!(completed.matches("K3 = ").count(), 3);
    assert!(completed.contains("mu = 0.3"), "auto resolved to a number");

    // the completed file passes its own check
    let out = poscon(&["check", out_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
}

#[test]
fn synthesize_keeps_gains_that_are_already_complete() {
    let dir = scratch("synthkeep");
    let out_path = dir.join("kept.toml");
    let out = poscon(&["synthesize", &bundled_path(), "--out", out_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("kept"));
    let completed = fs::read_to_string(&out_path).unwrap();
    assert!(completed.contains("K1 = [[-0.5, 0.0]]"), "user gains survive verbatim");
}

#[test]
fn synthesize_reports_the_infeasible_agent() {
    let dir = scratch("synthfail");
    // remove agent 1's input authority entirely: A1 has spectral radius 1,
    // no gain can stabilize it through B = 0
    let text = bundled_example()
        .replace("B = [[1.0], [0.0]]", "B = [[0.0], [0.0]]")
        .lines()
        .filter(|l| !l.starts_with("K1 ") && !l.starts_with("K2 "))
        .collect::<Vec<_>>()
        .join("\n");
    let input = write_scenario(&dir, "hopeless.toml", &text);
    let out = poscon(&["synthesize", &input, "--out", dir.join("never.toml").to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("agent 1"), "stderr: {}", stderr(&out));
    assert!(!dir.join("never.toml").exists());
}

#[test]
fn paper_example_runs_all_three_modes() {
    let dir = scratch("pex");
    let out_dir = dir.join("out");
    let out = poscon(&["paper-example", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    for mode in ["state-feedback", "output-feedback", "observer-only"] {
        let sub = out_dir.join(mode);
        assert!(sub.join("trace.csv").exists(), "{mode} trace missing");
        let summary: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(sub.join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["mode"], mode);
        assert_eq!(summary["positivity"]["pass"], true);
        assert_eq!(summary["convergence"]["converged"], true);
    }
}
