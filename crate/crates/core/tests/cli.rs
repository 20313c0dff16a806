use std::path::Path;
use std::process::Command;

use osrpc::simulate::SimulationTruth;
use osrpc::trace::ChainTrace;

fn osrpc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_osrpc"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = osrpc(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: [&str; 6] = ["--n-per-subpop", "25", "--p", "10", "--seed", "7"];
const SHORT: [&str; 12] = [
    "--adaptive-iters", "120", "--fixed-iters", "60", "--burnin", "20", "--thin", "4", "--k0", "8",
    "--ks", "4",
];

fn simulate_into(dir: &Path, case: &str) {
    let mut args = vec!["simulate", "--case", case, "--replicates", "2", "--out", p(dir)];
    args.extend(SMALL);
    ok(&args);
}

#[test]
fn simulate_writes_named_replicates_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate_into(a.path(), "A");
    simulate_into(b.path(), "A");
    for name in ["rep1_A.csv", "rep2_A.csv", "rep1_A.truth.json", "rep2_A.truth.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between equal-seed runs");
    }
    assert_eq!(std::fs::read_dir(a.path()).unwrap().count(), 4);
    let truth = SimulationTruth::load_json(&a.path().join("rep1_A.truth.json")).unwrap();
    assert_eq!(truth.true_c.len(), 100);
}

#[test]
fn simulate_requires_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = osrpc(&["simulate", "--case", "A", "--replicates", "1", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreadable_csv_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "id,subpop,outcome,v1\n1,1,1,0\n2,1,2,1\n").unwrap();
    let out = osrpc(&["fit", "--input", p(&csv), "--seed", "1", "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));
}

#[test]
fn degenerate_fit_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    simulate_into(dir.path(), "A");
    let input = dir.path().join("rep1_A.csv");
    let fit_dir = dir.path().join("fit");
    let mut args = vec!["fit", "--input", p(&input), "--seed", "1", "--threshold", "0.999"];
    args.extend(["--out", p(&fit_dir)]);
    args.extend(SHORT);
    let out = osrpc(&args);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn fit_resume_and_summarize() {
    let dir = tempfile::tempdir().unwrap();
    simulate_into(dir.path(), "B");
    let input = dir.path().join("rep1_B.csv");
    let straight = dir.path().join("straight");
    let split = dir.path().join("split");

    let base = |out: &Path| {
        let mut a: Vec<String> = ["fit", "--mode", "osrpc", "--seed", "3", "--checkpoint-every", "10"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        a.extend(["--input".into(), p(&input).into(), "--out".into(), p(out).into()]);
        a.extend(SHORT.iter().map(|s| s.to_string()));
        a
    };
    let run = |args: Vec<String>| ok(&args.iter().map(String::as_str).collect::<Vec<_>>());

    run(base(&straight));
    for name in ["trace.jsonl", "fit_log.csv", "fit.json", "checkpoint.json"] {
        assert!(straight.join(name).exists(), "missing {name}");
    }
    let log = std::fs::read_to_string(straight.join("fit_log.csv")).unwrap();
    assert!(log.starts_with("phase,iteration,loglik,outcome_loglik,occupied_clusters"));

    let mut first = base(&split);
    first.extend(["--stop-after".into(), "27".into()]);
    run(first);
    assert!(!split.join("trace.jsonl").exists());
    let mut resume = base(&split);
    resume.push("--resume".into());
    run(resume);
    assert_eq!(
        std::fs::read(straight.join("trace.jsonl")).unwrap(),
        std::fs::read(split.join("trace.jsonl")).unwrap()
    );

    let trace = ChainTrace::read_jsonl(&straight.join("trace.jsonl")).unwrap();
    assert_eq!(trace.len(), 10);

    let summary_dir = dir.path().join("summary");
    ok(&[
        "summarize",
        "--input",
        p(&input),
        "--trace",
        p(&straight.join("trace.jsonl")),
        "--truth",
        p(&dir.path().join("rep1_B.truth.json")),
        "--out",
        p(&summary_dir),
    ]);
    for name in ["summary.json", "modal_patterns.csv", "nu_heatmap.csv", "metrics.json"] {
        assert!(summary_dir.join(name).exists(), "missing {name}");
    }
    let heat = std::fs::read_to_string(summary_dir.join("nu_heatmap.csv")).unwrap();
    assert_eq!(heat.lines().count(), 11);
    assert!(heat.starts_with("variable,subpop1,subpop2,subpop3,subpop4"));
    let modal = std::fs::read_to_string(summary_dir.join("modal_patterns.csv")).unwrap();
    for line in modal.lines().skip(1) {
        for level in line.split(',').skip(1) {
            assert!((1..=4).contains(&level.parse::<usize>().unwrap()));
        }
    }

    let table_dir = dir.path().join("table");
    ok(&["compare", "--metrics-dir", p(&summary_dir), "--out", p(&table_dir)]);
    let table = std::fs::read_to_string(table_dir.join("table.csv")).unwrap();
    assert!(table.starts_with("metric,osLCM-A,osRPC-A,osLCM-B,osRPC-B"));
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(summary_dir.join("metrics.json")).unwrap()).unwrap();
    let k_row = table.lines().find(|l| l.starts_with("K_pred")).unwrap();
    let cells: Vec<&str> = k_row.split(',').collect();
    let k: f64 = cells[4].parse().unwrap();
    assert_eq!(k, metrics["metrics"]["k_pred"].as_f64().unwrap());
    assert!(cells[1].is_empty() && cells[2].is_empty() && cells[3].is_empty());
}

#[test]
fn compare_runs_a_small_study_with_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("study.json");
    std::fs::write(
        &config,
        r#"{
            "seed": 11,
            "simulation": { "n_per_subpop": 25, "p": 10, "n_replicates": 1 },
            "sampler": { "adaptive_iters": 100, "adaptive_burnin": 50,
                         "fixed_iters": 40, "fixed_burnin": 20, "thin": 4 },
            "hyper": { "k0": 8, "ks": 4 }
        }"#,
    )
    .unwrap();
    // The flag overrides the file's replicate count.
    ok(&["compare", "--config", p(&config), "--replicates", "2", "--out", p(dir.path())]);
    let detail = std::fs::read_to_string(dir.path().join("detail.csv")).unwrap();
    assert_eq!(detail.lines().count(), 1 + 2 * 2 * 2);
    let table = std::fs::read_to_string(dir.path().join("table.csv")).unwrap();
    let nu_row = table.lines().find(|l| l.starts_with("nu_MSE")).unwrap();
    let cells: Vec<&str> = nu_row.split(',').collect();
    assert!(cells[1].is_empty() && !cells[2].is_empty() && cells[3].is_empty() && !cells[4].is_empty());
}

#[test]
fn fit_runs_independent_chains_in_subdirectories() {
    let dir = tempfile::tempdir().unwrap();
    simulate_into(dir.path(), "A");
    let input = dir.path().join("rep1_A.csv");
    let fit_dir = dir.path().join("fit");
    let mut args = vec!["fit", "--input", p(&input), "--seed", "5", "--chains", "2", "--jobs", "2"];
    args.extend(["--out", p(&fit_dir)]);
    args.extend(SHORT);
    ok(&args);
    let a = std::fs::read(fit_dir.join("chain1").join("trace.jsonl")).unwrap();
    let b = std::fs::read(fit_dir.join("chain2").join("trace.jsonl")).unwrap();
    assert_ne!(a, b);
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fit_dir.join("chain2").join("fit.json")).unwrap()).unwrap();
    assert_eq!(record["chain"], 2);
}
