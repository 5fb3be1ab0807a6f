use dcm::designs;
use dcm::harness::{render_text, run_study, DesignSource, Evaluation, StudyConfig, StudyReport};
use dcm::inference::{align_labels, posterior_mean, truncate_classes};
use dcm::sampler::{run_chain_with, SamplerConfig};
use dcm::simulate::{simulate_with, stream_rng};

fn small_study(name: &str, replicates: usize) -> StudyConfig {
    let mut cfg = StudyConfig::new(designs::by_name(name).unwrap(), 400, replicates, 9);
    cfg.sampler = SamplerConfig {
        iterations: 800,
        burn_in: 200,
        thin: 2,
        ..SamplerConfig::default()
    };
    cfg
}

#[test]
fn oracle_study_has_zero_error() {
    let mut cfg = small_study("nida", 2);
    cfg.evaluation = Evaluation {
        oracle: true,
        ..Evaluation::default()
    };
    let (report, _) = run_study(&cfg).unwrap();
    assert_eq!(report.included(), 2);
    for w in &report.weights {
        assert_eq!(w.mse, Some(0.0), "{}", w.label);
    }
    for p in &report.probs {
        assert_eq!(p.stat.mse, Some(0.0));
    }
    for p in &report.params {
        assert!(p.mse.unwrap() < 1e-20, "{}: {:?}", p.label, p.mse);
    }
    assert_eq!(report.partial_info_accuracy, Some(1.0));
    assert!(report
        .per_replicate
        .iter()
        .all(|r| r.retained == 8 && r.discarded_mass == 0.0));
}

/// Replays each replicate by hand from its documented streams.
#[test]
fn aggregates_match_a_naive_recomputation() {
    let cfg = small_study("reduced_ncrum", 2);
    let (report, timing) = run_study(&cfg).unwrap();
    assert_eq!(timing.replicate_seconds.len(), 2);
    assert_eq!(report.included(), 2);
    let d = designs::reduced_ncrum();
    let (truth, truth_w) = d.truth().unwrap();
    let full = d.table().unwrap();
    let mut weights = vec![Vec::new(); truth.n_classes()];
    let mut item1 = vec![Vec::new(); truth.n_classes()];
    for r in 1..=2u64 {
        let data =
            simulate_with(&full, &d.weights, cfg.n, &mut stream_rng(cfg.seed, 2 * r)).unwrap();
        let sampler = SamplerConfig {
            seed: cfg.seed,
            stream: 2 * r + 1,
            ..cfg.sampler.clone()
        };
        let draws = run_chain_with(&data, &sampler, &mut stream_rng(cfg.seed, 2 * r + 1)).unwrap();
        let est = posterior_mean(&draws).unwrap();
        let tr = truncate_classes(&est, cfg.n, None).unwrap();
        let est = est.restrict(&tr.retained).unwrap();
        let al = align_labels(&est.table, &truth).unwrap();
        for c in 0..truth.n_classes() {
            let a = al.inverse(c);
            weights[c].push(a.map_or(0.0, |a| est.weights[a]));
            if let Some(a) = a {
                item1[c].push(est.table.positive(0, a));
            }
        }
    }
    for c in 0..truth.n_classes() {
        let t = truth_w.as_slice()[c];
        let mean = weights[c].iter().sum::<f64>() / 2.0;
        let mse = weights[c].iter().map(|w| (w - t) * (w - t)).sum::<f64>() / 2.0;
        let got = &report.weights[c];
        assert!((got.mean.unwrap() - mean).abs() < 1e-12);
        assert!((got.mse.unwrap() - mse).abs() < 1e-12);

        let cell = report.prob(0, c).unwrap();
        assert_eq!(cell.count, item1[c].len());
        if !item1[c].is_empty() {
            let t = truth.positive(0, c);
            let k = item1[c].len() as f64;
            let mse = item1[c].iter().map(|p| (p - t) * (p - t)).sum::<f64>() / k;
            assert!((cell.mse.unwrap() - mse).abs() < 1e-12);
        }
    }
}

#[test]
fn reports_are_deterministic_and_round_trip() {
    let cfg = small_study("lcdm", 2);
    let (a, _) = run_study(&cfg).unwrap();
    let (b, _) = run_study(&StudyConfig {
        workers: Some(2),
        ..cfg.clone()
    })
    .unwrap();
    let json = a.to_json().unwrap();
    assert_eq!(json, b.to_json().unwrap());
    let back = StudyReport::from_json(&json).unwrap();
    assert_eq!(back, a);
    assert_eq!(render_text(&back), render_text(&a));
    let (c, _) = run_study(&StudyConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(c.to_json().unwrap(), json);
}

#[test]
fn config_files_resolve_against_their_directory() {
    let dir = tempfile::tempdir().unwrap();
    let d = designs::nida();
    std::fs::create_dir(dir.path().join("design")).unwrap();
    d.q.write_csv(dir.path().join("design/q.csv")).unwrap();
    d.model
        .write_json(dir.path().join("design/model.json"))
        .unwrap();
    std::fs::write(
        dir.path().join("design/pi.json"),
        serde_json::to_string(&d.weights).unwrap(),
    )
    .unwrap();
    let text = r#"{
        "design": { "model": "design/model.json", "q": "design/q.csv", "pi": "design/pi.json",
                    "report_order": [4, 2, 1, 6, 5, 3, 7, 0] },
        "n": 100,
        "replicates": 1,
        "evaluation": { "oracle": true },
        "output_dir": "out"
    }"#;
    let path = dir.path().join("study.json");
    std::fs::write(&path, text).unwrap();
    let cfg = StudyConfig::read(&path).unwrap();
    assert_eq!(
        cfg.output_dir.as_deref(),
        Some(dir.path().join("out").as_path())
    );
    let design = cfg.design.resolve(&cfg.base_dir).unwrap();
    assert_eq!(design.q, d.q);
    assert_eq!(design.reported_classes(), d.reported_classes());
    assert!(matches!(cfg.design, DesignSource::Files { .. }));
    let (report, _) = run_study(&cfg).unwrap();
    assert_eq!(
        report.weights.iter().map(|w| w.truth).collect::<Vec<_>>(),
        d.truth().unwrap().1.as_slice()
    );
}
