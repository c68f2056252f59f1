use std::process::Command;

use hrelm_exp::config::{EnvKind, ExperimentConfig, Method};
use hrelm_exp::sweep::SWEEP_HEADER;

fn hrelm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hrelm"))
}

#[test]
fn config_file_accepts_table_names() {
    let text = "\
# gradient baseline
method = gradq
Learning rate = 0.01
Hidden nodes = 12
Discount factor = 0.95
Minibatch size = 8
Target network update steps = 30
Episodes to decrease exploration probability = 50
Initial exploration probability = 0.4
env = uncapped
input-scale = 1, 1, 10, 1
";
    let cfg = ExperimentConfig::parse(text).unwrap();
    assert_eq!(cfg.method, Method::Gradq);
    assert_eq!(cfg.env, EnvKind::Uncapped);
    let a = &cfg.agent;
    assert_eq!(
        (
            a.learning_rate,
            a.hidden_nodes,
            a.discount,
            a.minibatch,
            a.target_update_steps,
            a.eps_episodes,
            a.eps_initial
        ),
        (0.01, 12, 0.95, 8, 30, 50, 0.4)
    );
    assert_eq!(a.input_scale, Some(vec![1.0, 1.0, 10.0, 1.0]));

    let elm =
        ExperimentConfig::parse("Regularization parameter = 2e-5\nRegularization order = 3\n")
            .unwrap();
    assert_eq!((elm.agent.regularization, elm.agent.reg_order), (2e-5, 3));
}

#[test]
fn train_writes_results_and_summarize_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("exp.cfg");
    std::fs::write(&cfg_path, "Hidden nodes = 10\nruns = 5\n").unwrap();
    let out = dir.path().join("res");
    let status = hrelm()
        .args(["train", "--config"])
        .arg(&cfg_path)
        .args([
            "--method",
            "eqlm",
            "--runs",
            "2",
            "--episodes",
            "3",
            "--seed",
            "4",
            "--workers",
            "1",
            "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    for f in ["run_000.csv", "run_001.csv", "summary.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["method"], "eqlm");
    assert_eq!(summary["config"]["runs"], 2);
    assert_eq!(summary["config"]["base_seed"], 4);

    let s = hrelm()
        .args(["summarize", "--in"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(s.status.success());
    let printed: serde_json::Value = serde_json::from_slice(&s.stdout).unwrap();
    assert_eq!(printed, summary["summary"]);
}

#[test]
fn sweep_command_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig.csv");
    let status = hrelm()
        .args([
            "sweep",
            "--strategy",
            "scalar,offset",
            "--orders",
            "0..=5",
            "--grid-log",
            "-2:1:4",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), SWEEP_HEADER.join(","));
    assert_eq!(text.lines().count(), 1 + 2 * 6 * 4);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_cfg = dir.path().join("bad.cfg");
    std::fs::write(&bad_cfg, "no such key = 1\n").unwrap();
    let code = |args: &[&str]| hrelm().args(args).output().unwrap().status.code();
    assert_eq!(
        code(&["train", "--config", bad_cfg.to_str().unwrap()]),
        Some(1)
    );
    assert_eq!(code(&["train", "--method", "sarsa"]), Some(1));
    assert_eq!(
        code(&["sweep", "--strategy", "magic", "--out", "x.csv"]),
        Some(1)
    );
    assert_eq!(code(&["frobnicate"]), Some(1));
    let missing = dir.path().join("nothing-here");
    assert_eq!(
        code(&["summarize", "--in", missing.to_str().unwrap()]),
        Some(2)
    );
    assert_eq!(code(&["--help"]), Some(0));
}
