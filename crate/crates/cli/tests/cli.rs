//! End-to-end tests of the binary: spawn it the way a user would and check
//! artifacts, exit codes and the machine-readable error envelope.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crnhje")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout_paths(out: &Output) -> Vec<PathBuf> {
    String::from_utf8_lossy(&out.stdout).lines().map(PathBuf::from).collect()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).expect("stderr is an error envelope")
}

const CANONICAL: &str = r#"
[network]
species = 2

[[network.reaction]]
reactants = [1, 0]
products = [0, 1]
k_forward = 1.0
k_backward = 1.0

[domain]
shape = "ball"
center = [7.0, 3.0]
radius = 1.4142135623730951
"#;

#[test]
fn counterexample_reports_the_violation() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["counterexample", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let paths = stdout_paths(&out);
    assert_eq!(paths.len(), 1, "counterexample emits JSON only");
    let text = std::fs::read_to_string(&paths[0]).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["subcommand"], "counterexample");
    assert_eq!(json["report"]["verdict"], "violated");
    let value = json["report"]["report"]["test_value"].as_f64().unwrap();
    assert!((value + 0.150292).abs() < 1e-6, "value {value}");
    // The filename embeds the same hash the envelope carries.
    let hash = json["config_hash"].as_str().unwrap();
    assert!(paths[0].file_name().unwrap().to_str().unwrap().contains(hash));
}

#[test]
fn identical_config_and_seed_reproduce_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &format!(
            "{CANONICAL}\n[run]\nt = 0.3\nh = 0.5\nsamples = 500\nseed = 7\n"
        ),
    );
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let run_a = run(&["simulate", "--config", config.to_str().unwrap(), "--out", out_a.to_str().unwrap()]);
    let run_b = run(&["simulate", "--config", config.to_str().unwrap(), "--out", out_b.to_str().unwrap()]);
    assert!(run_a.status.success() && run_b.status.success());
    let paths_a = stdout_paths(&run_a);
    let paths_b = stdout_paths(&run_b);
    assert_eq!(paths_a.len(), 2);
    for (a, b) in paths_a.iter().zip(&paths_b) {
        assert_eq!(a.file_name(), b.file_name(), "same config, same artifact names");
        assert_eq!(
            std::fs::read(a).unwrap(),
            std::fs::read(b).unwrap(),
            "byte-identical artifacts for {a:?}"
        );
    }

    // A different seed is a different effective configuration: the artifacts
    // land under a different hash.
    let run_c = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_a.to_str().unwrap(),
        "--seed",
        "8",
    ]);
    assert!(run_c.status.success());
    let paths_c = stdout_paths(&run_c);
    assert_ne!(paths_a[0].file_name(), paths_c[0].file_name());
}

#[test]
fn parse_errors_carry_location_context() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "species = [\n");
    let out = run(&["counterexample", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["kind"], "parse");
    let message = err["error"]["message"].as_str().unwrap();
    assert!(message.contains("line"), "no location in: {message}");
}

#[test]
fn unknown_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &format!("{CANONICAL}\n[run]\nn_alfa = 3\n"));
    let out = run(&["counterexample", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["kind"], "parse");
    assert!(err["error"]["message"].as_str().unwrap().contains("n_alfa"));
}

#[test]
fn validation_reports_every_violation_at_once() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"
[network]
species = 2

[[network.reaction]]
reactants = [1, 0]
products = [0, 1]
k_forward = -1.0
k_backward = 1.0

[domain]
shape = "ball"
center = [7.0, 3.0]
radius = 1.4142135623730951

[run]
h = -0.5
t = 0.0
"#,
    );
    let out = run(&["solve-dhje", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"]["kind"], "validation");
    let details = err["error"]["details"].as_array().unwrap();
    assert!(details.len() >= 3, "expected all violations, got {details:?}");
    let all = details.iter().map(|d| d.as_str().unwrap()).collect::<Vec<_>>().join(" | ");
    assert!(all.contains("k_forward") && all.contains("run.h") && all.contains("run.t"), "{all}");
}

#[test]
fn constant_data_passes_through_solve_dhje() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &format!(
            "{CANONICAL}\n[run]\nt = 1.0\nh = 0.5\n\n[run.u0]\ncoeffs = [0.0, 0.0]\noffset = 3.5\n"
        ),
    );
    let out = run(&["solve-dhje", "--config", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let paths = stdout_paths(&out);
    let csv = std::fs::read_to_string(&paths[0]).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "x1,x2,u0,u_t");
    let mut rows = 0;
    for line in lines {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells[3], 3.5, "constants are exactly preserved");
        rows += 1;
    }
    assert!(rows > 0);
}
