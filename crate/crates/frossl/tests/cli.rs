//! End-to-end tests of the binary: exit codes, artifact emission,
//! determinism across re-runs, and the data/plot tools.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_frossl"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL_TRAIN: &str = "[objective]\nname = frossl\n\n[train]\nsteps = 30\nseed = 7\nrecord_every = 10\n";

#[test]
fn help_lists_all_subcommands() {
    let out = bin().arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["train", "verify", "gradcheck", "bench", "data-gen", "data-inspect", "plot"] {
        assert!(text.contains(sub), "--help missing subcommand {sub}");
    }
}

#[test]
fn train_missing_objective_name_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.ini", "[train]\nsteps = 1\n");
    let out = run_in(dir.path(), &["train", "--config", &cfg, "--out-dir", "run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("objective.name"),
        "stderr must name the missing field"
    );
}

#[test]
fn train_zero_steps_emits_initial_row_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cfg.ini",
        "[objective]\nname = frossl\n\n[train]\nsteps = 0\n",
    );
    let out = run_in(dir.path(), &["train", "--config", &cfg, "--out-dir", "run"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("run/trajectory.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 2, "header plus the initial record only");
    assert!(rows[1].starts_with("0,"));
}

#[test]
fn train_reruns_reproduce_artifacts_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.ini", SMALL_TRAIN);
    assert!(run_in(dir.path(), &["train", "--config", &cfg, "--out-dir", "a"]).status.success());
    assert!(run_in(dir.path(), &["train", "--config", &cfg, "--out-dir", "b"]).status.success());
    // and once more through the manifest
    let manifest = dir.path().join("a/manifest.json").to_string_lossy().into_owned();
    assert!(run_in(dir.path(), &["train", "--from-manifest", &manifest, "--out-dir", "c"])
        .status
        .success());
    let read = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("a/trajectory.csv"), read("b/trajectory.csv"));
    assert_eq!(read("a/trajectory.csv"), read("c/trajectory.csv"));
    assert_eq!(read("a/checkpoint.bin"), read("b/checkpoint.bin"));
    assert_eq!(read("a/checkpoint.bin"), read("c/checkpoint.bin"));
}

#[test]
fn env_seed_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.ini", SMALL_TRAIN);
    let out = bin()
        .current_dir(dir.path())
        .env("FROSSL_SEED", "99")
        .args(["train", "--config", &cfg, "--out-dir", "run"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let manifest = std::fs::read_to_string(dir.path().join("run/manifest.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(parsed["seed"], 99);
    assert_eq!(parsed["config"]["train.seed"], "99");
}

#[test]
fn numerical_abort_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // a divergent learning rate on the cubically growing covariance penalty
    let cfg = write_config(
        dir.path(),
        "cfg.ini",
        "[objective]\nname = vicreg\n\n[train]\nsteps = 500\nlearning_rate = 10.0\n",
    );
    let out = run_in(dir.path(), &["train", "--config", &cfg, "--out-dir", "run"]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step"));
}

#[test]
fn verify_suites_pass_and_reject_typos() {
    let dir = tempfile::tempdir().unwrap();
    for suite in ["identities", "propositions", "rotations"] {
        let out = run_in(dir.path(), &["verify", suite]);
        assert_eq!(out.status.code(), Some(0), "suite {suite}");
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("PASS"));
        assert!(!text.contains("FAIL"));
    }
    let out = run_in(dir.path(), &["verify", "typo"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("identities"));
}

#[test]
fn gradcheck_single_objective_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["gradcheck", "--objective", "frossl", "--trials", "3"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));

    let out = run_in(dir.path(), &["gradcheck", "--objective", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_emits_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "bench", "--objective", "frossl", "--n", "64", "--d-grid", "8,12,16,24", "--out",
            "report.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    for key in ["objective", "grid", "medians", "mads", "slope", "pinned"] {
        assert!(report.get(key).is_some(), "report missing key {key}");
    }
}

#[test]
fn data_tools_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "data-gen", "--classes", "3", "--dim", "6", "--per-class", "4", "--images", "i.idx",
            "--labels", "l.idx",
        ],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let out = run_in(dir.path(), &["data-inspect", "--images", "i.idx", "--labels", "l.idx"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("samples: 12"));
    assert!(text.contains("classes: 3"));

    // corrupt magic -> usage/config exit code with a diagnostic
    let mut bytes = std::fs::read(dir.path().join("i.idx")).unwrap();
    bytes[3] = 0x02;
    std::fs::write(dir.path().join("bad.idx"), bytes).unwrap();
    let out = run_in(dir.path(), &["data-inspect", "--images", "bad.idx", "--labels", "l.idx"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic"));
}

#[test]
fn plot_renders_and_rejects_malformed_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "cfg.ini", SMALL_TRAIN);
    assert!(run_in(dir.path(), &["train", "--config", &cfg, "--out-dir", "run"]).status.success());
    let out = run_in(
        dir.path(),
        &["plot", "--input", "run/trajectory.csv", "--output", "t.svg", "--log-y"],
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let svg = std::fs::read_to_string(dir.path().join("t.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 20);

    // byte-stable across re-renders
    assert!(run_in(dir.path(), &["plot", "--input", "run/trajectory.csv", "--output", "t2.svg", "--log-y"]).status.success());
    assert_eq!(std::fs::read(dir.path().join("t.svg")).unwrap(), std::fs::read(dir.path().join("t2.svg")).unwrap());

    std::fs::write(dir.path().join("broken.csv"), "step,loss,inv,var,acc,lambda_1\n0,1,1\n").unwrap();
    let out = run_in(dir.path(), &["plot", "--input", "broken.csv", "--output", "x.svg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    let out = run_in(dir.path(), &["plot", "--input", "empty.csv", "--output", "x.svg"]);
    assert_eq!(out.status.code(), Some(2));
}
