use std::path::Path;
use std::process::{Command, Output};

use dcm::designs;
use dcm::models::ModelParams;

fn dcm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcm"))
        .args(args)
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_design(
    dir: &Path,
    model: &ModelParams,
    q: &dcm::models::QMatrix,
    weights: &dcm::simulate::MixtureWeights,
) {
    model.write_json(dir.join("model.json")).unwrap();
    q.write_csv(dir.join("q.csv")).unwrap();
    std::fs::write(dir.join("pi.json"), serde_json::to_string(weights).unwrap()).unwrap();
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn check_id_reports_pass_and_fail() {
    let dir = tempfile::tempdir().unwrap();
    let d = designs::nida();
    write_design(dir.path(), &d.model, &d.q, &d.weights);
    let model = dir.path().join("model.json");
    let q = dir.path().join("q.csv");
    let pi = dir.path().join("pi.json");
    let out = dcm(&[
        "check-id",
        "--model",
        path(&model),
        "--q",
        path(&q),
        "--pi",
        path(&pi),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("identified (sufficient condition verified): yes"));

    let json = dir.path().join("verdicts.json");
    let out = dcm(&[
        "check-id",
        "--model",
        path(&model),
        "--q",
        path(&q),
        "--pi",
        path(&pi),
        "--theorem",
        "3",
        "--format",
        "structured",
        "--out",
        path(&json),
    ]);
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["identified"], true);
    assert_eq!(report["verdicts"][0]["check"], "full_rank");

    // item 1 constant and items 2-3 gone
    let ModelParams::Nida {
        mut slip,
        mut guess,
    } = d.model.clone()
    else {
        unreachable!()
    };
    slip[0][0] = Some(0.5);
    guess[0][0] = Some(0.5);
    slip.drain(1..3);
    guess.drain(1..3);
    let q2 = d.q.without_items(&[1, 2]).unwrap();
    write_design(
        dir.path(),
        &ModelParams::Nida { slip, guess },
        &q2,
        &d.weights,
    );
    let out = dcm(&[
        "check-id",
        "--model",
        path(&model),
        "--q",
        path(&q),
        "--pi",
        path(&pi),
        "--theorem",
        "4",
    ]);
    let text = stdout(&out);
    assert!(text.contains("result: FAIL"), "{text}");
    assert!(text.contains("attribute 1"), "{text}");
}

#[test]
fn simulate_fit_cluster_reconstruct() {
    let dir = tempfile::tempdir().unwrap();
    let d = designs::nida();
    write_design(dir.path(), &d.model, &d.q, &d.weights);
    let p = |name: &str| dir.path().join(name);
    let out = dcm(&[
        "simulate",
        "--model",
        path(&p("model.json")),
        "--q",
        path(&p("q.csv")),
        "--pi",
        path(&p("pi.json")),
        "--n",
        "400",
        "--seed",
        "5",
        "--out",
        path(&p("data.csv")),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let data = std::fs::read_to_string(p("data.csv")).unwrap();
    assert_eq!(data.lines().count(), 401);

    std::fs::write(
        p("sampler.json"),
        r#"{"iterations": 600, "burn_in": 200, "thin": 2}"#,
    )
    .unwrap();
    let out = dcm(&[
        "fit",
        "--data",
        path(&p("data.csv")),
        "--config",
        path(&p("sampler.json")),
        "--seed",
        "6",
        "--out",
        path(&p("draws.bin")),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let draws = dcm::sampler::PosteriorDraws::read(p("draws.bin")).unwrap();
    assert_eq!(draws.len(), 200);

    let out = dcm(&[
        "cluster",
        "--draws",
        path(&p("draws.bin")),
        "--out",
        path(&p("clusters.json")),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p("clusters.json")).unwrap()).unwrap();
    assert_eq!(report["n"], 400);
    assert_eq!(report["partitions"].as_array().unwrap().len(), 13);

    let out = dcm(&[
        "reconstruct-q",
        "--partitions",
        path(&p("clusters.json")),
        "--attributes",
        "3",
        "--out",
        path(&p("q.json")),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rec: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p("q.json")).unwrap()).unwrap();
    assert_eq!(rec["rows"].as_array().unwrap().len(), 13);
}

#[test]
fn usage_and_input_errors_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dcm(&["report", "--in", path(dir.path()), "--format", "bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
    let out = dcm(&["report", "--in", path(&dir.path().join("missing"))]);
    assert_eq!(out.status.code(), Some(1));
    let out = dcm(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn replicate_writes_reports_and_honors_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.json");
    std::fs::write(
        &cfg,
        r#"{
            "design": { "builtin": "reduced_ncrum" },
            "n": 300,
            "replicates": 2,
            "seed": 4,
            "sampler": { "iterations": 500, "burn_in": 100, "thin": 2 },
            "output_dir": "ignored"
        }"#,
    )
    .unwrap();
    let out_dir = dir.path().join("results");
    let out = Command::new(env!("CARGO_BIN_EXE_dcm"))
        .args(["replicate", "--config", path(&cfg)])
        .env(dcm::harness::ENV_OUTPUT_DIR, &out_dir)
        .env(dcm::harness::ENV_WORKERS, "1")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in ["report.json", "report.txt", "timing.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    assert!(!dir.path().join("ignored").exists());

    let out = dcm(&["report", "--in", path(&out_dir), "--format", "structured"]);
    assert!(out.status.success());
    let report = dcm::harness::StudyReport::from_json(&stdout(&out)).unwrap();
    assert_eq!(report.design, "reduced_ncrum");
    assert_eq!(report.replicates, 2);
    let out = dcm(&["report", "--in", path(&out_dir)]);
    assert_eq!(
        stdout(&out),
        std::fs::read_to_string(out_dir.join("report.txt")).unwrap()
    );
}
