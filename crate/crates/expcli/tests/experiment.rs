use std::fs;
use std::path::Path;

use hrelm_exp::config::{EnvKind, ExperimentConfig, Method};
use hrelm_exp::experiment::{
    run_experiment, run_experiment_with, summarize_dir, RunRecord, WINDOW,
};
use hrelm_exp::metrics::{auc, mean, tail_mean};

fn config(method: Method, dir: &Path, runs: usize, episodes: usize) -> ExperimentConfig {
    ExperimentConfig {
        runs,
        episodes,
        output_dir: dir.to_path_buf(),
        base_seed: 11,
        workers: 2,
        ..ExperimentConfig::new(method)
    }
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn single_short_run() {
    let dir = tempfile::tempdir().unwrap();
    let (records, summary) = run_experiment(&config(Method::Hr, dir.path(), 1, 1)).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].rewards.len(), 1);
    assert!(records[0].rewards[0] <= 200.0);
    assert_eq!(summary.completed_runs, 1);
    assert_eq!(summary.ci95_mean_final50, None);
    assert!(!summary.warning);
}

#[test]
fn reruns_are_byte_identical() {
    for method in [Method::Hr, Method::Gradq] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_experiment(&config(method, a.path(), 3, 15)).unwrap();
        let mut cfg = config(method, b.path(), 3, 15);
        cfg.workers = 1;
        run_experiment(&cfg).unwrap();
        let (fa, fb) = (files(a.path()), files(b.path()));
        assert_eq!(fa.len(), 4);
        // Independent of output directory and worker count.
        assert_eq!(fa, fb, "{method}");
        let again = tempfile::tempdir().unwrap();
        let cfg = config(method, again.path(), 3, 15);
        run_experiment(&cfg).unwrap();
        let moved = files(again.path());
        run_experiment(&cfg).unwrap();
        assert_eq!(moved, files(again.path()));
    }
}

#[test]
fn summary_is_recomputable_from_run_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(Method::Eqlm, dir.path(), 3, 70);
    let (records, summary) = run_experiment(&cfg).unwrap();
    let finals: Vec<f64> = records
        .iter()
        .map(|r| tail_mean(&r.rewards, WINDOW))
        .collect();
    assert_eq!(summary.final50, finals);
    assert!((summary.mean_final50 - mean(&finals)).abs() < 1e-12);
    let aucs: Vec<f64> = records
        .iter()
        .map(|r: &RunRecord| auc(&r.rewards))
        .collect();
    assert!((summary.auc - mean(&aucs)).abs() < 1e-12);
    for (lo, hi, p) in [
        (summary.ci95_mean_final50, summary.mean_final50),
        (summary.ci95_std_final50, summary.std_final50),
        (summary.ci95_auc, summary.auc),
    ]
    .map(|(ci, p)| (ci.unwrap().0, ci.unwrap().1, p))
    {
        assert!(lo <= p && p <= hi);
    }
    assert_eq!(summarize_dir(dir.path()).unwrap(), summary);
    for r in &records {
        assert_eq!(r.rewards.len(), 70);
        assert_eq!(r.seed, 11 + r.run_index as u64);
    }
}

#[test]
fn run_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let (records, _) = run_experiment(&config(Method::Hr, dir.path(), 1, 4)).unwrap();
    let text = fs::read_to_string(dir.path().join("run_000.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("episode,reward,steps"));
    for (i, line) in lines.enumerate() {
        let r = records[0].rewards[i];
        assert_eq!(line, format!("{i},{r:?},{}", records[0].steps[i]));
    }
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(json["summary"]["schema_version"], 1);
    assert!(json.to_string().find("wall").is_none());
}

#[test]
fn gram_capture_feeds_sweep() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment_with(&config(Method::Hr, dir.path(), 1, 5), true).unwrap();
    let gram = dir.path().join("gram_000.csv");
    assert!(gram.exists());
    let out = dir.path().join("sweep.csv");
    let n = hrelm_exp::emit_sweep(
        &hrelm_exp::sweep::ProblemSource::GramFile(gram),
        &[hrelm::regcore::StrategyFamily::Scalar],
        &[0, 1],
        &[1e4, 1e5],
        hrelm::regcore::HrMode::Standard,
        &out,
    )
    .unwrap();
    assert_eq!(n, 4);
}

#[test]
fn invalid_configs_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(Method::Hr, dir.path(), 0, 10);
    assert_eq!(run_experiment(&cfg).unwrap_err().exit_code(), 1);
    cfg.runs = 1;
    cfg.agent.eps_final = 0.9;
    assert_eq!(run_experiment(&cfg).unwrap_err().exit_code(), 1);
    let mut eq = config(Method::Eqlm, dir.path(), 1, 1);
    eq.agent.reg_order = 1;
    assert!(eq.validate().is_err());
    assert_eq!(config(Method::Hr, dir.path(), 1, 1).env, EnvKind::Capped);
}

#[test]
fn eqlm_and_hr_presets_differ_only_in_order() {
    let hr = ExperimentConfig::new(Method::Hr).agent;
    let eq = ExperimentConfig::new(Method::Eqlm).agent;
    assert_eq!((hr.reg_order, eq.reg_order), (1, 0));
    assert_eq!(hrelm::qagent::AgentConfig { reg_order: 0, ..hr }, eq);
}
