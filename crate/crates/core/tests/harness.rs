use std::fs;

use infoplan::harness::{
    aggregate_from_traces, read_trace_summary, run_experiment, run_learning_experiment, trace_path, DomainKind,
    ExperimentConfig, Mode, TraceLine,
};
use infoplan::learning::TrainConfig;
use infoplan::FKind;

fn small(dir: &std::path::Path) -> ExperimentConfig {
    ExperimentConfig {
        n: 2,
        trials: 4,
        seed: 12,
        output: dir.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

#[test]
fn aggregate_is_recomputable_from_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let r = run_experiment(&cfg).unwrap();
    assert_eq!(r.failed(), 0);
    assert_eq!(aggregate_from_traces(&cfg, dir.path()).unwrap(), r.aggregate);

    let mut rdr = csv::Reader::from_path(dir.path().join("aggregate.csv")).unwrap();
    let headers: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(headers[..6], ["domain", "n", "m", "f", "trials", "failed"]);
    assert_eq!(rdr.records().count(), 1);
}

#[test]
fn traces_hold_steps_then_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    run_experiment(&cfg).unwrap();
    let text = fs::read_to_string(trace_path(dir.path(), 0)).unwrap();
    let lines: Vec<TraceLine> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let (last, steps) = lines.split_last().unwrap();
    let TraceLine::Summary(summary) = last else { panic!("last line is not a summary") };
    assert_eq!(steps.len(), summary.steps);
    let total: f64 = steps
        .iter()
        .map(|l| match l {
            TraceLine::Step(s) => s.clean_score,
            TraceLine::Summary(_) => panic!("summary before the end"),
        })
        .sum();
    assert!((total - summary.score).abs() < 1e-9);
}

#[test]
fn same_seed_same_scores() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_experiment(&small(a.path())).unwrap();
    let rb = run_experiment(&small(b.path())).unwrap();
    for (x, y) in ra.summaries.iter().zip(&rb.summaries) {
        assert_eq!((x.score, x.noisy_score, x.replans, x.steps), (y.score, y.noisy_score, y.replans, y.steps));
    }
    let other = ExperimentConfig {
        seed: 13,
        ..small(b.path())
    };
    let rc = run_experiment(&other).unwrap();
    assert_ne!(
        ra.summaries.iter().map(|s| s.noisy_score).collect::<Vec<_>>(),
        rc.summaries.iter().map(|s| s.noisy_score).collect::<Vec<_>>()
    );
}

#[test]
fn infeasible_trials_are_counted_not_fatal() {
    // A scenario error aborts the batch up front.
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        n: 1,
        m: 1,
        trials: 2,
        scenario: None,
        output: dir.path().to_path_buf(),
        ..ExperimentConfig::default()
    };
    let bad_scenario = dir.path().join("scenario.json");
    fs::write(&bad_scenario, r#"{"objects": [{"id": 0, "type": 9}], "agent": 0}"#).unwrap();
    let err = run_experiment(&ExperimentConfig {
        scenario: Some(bad_scenario),
        ..cfg.clone()
    });
    assert!(err.is_err());

    // Weights longer than any factor make every trial fail on its own.
    let hopeless = ExperimentConfig {
        weights: Some(vec![1.0; 7]),
        ..cfg
    };
    let r = run_experiment(&hopeless).unwrap();
    assert_eq!(r.failed(), 2);
    assert!(read_trace_summary(&trace_path(dir.path(), 0)).unwrap().error.is_some());
}

#[test]
fn config_file_round_trip_and_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(&path, r#"{"domain": "zones", "n": 3, "m": 2, "f_kind": "sq", "train": {"episodes": 3}}"#).unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!((cfg.domain, cfg.f_kind, cfg.train.episodes), (DomainKind::Zones, FKind::Square, 3));
    fs::write(&path, r#"{"n": 3, "trails": 5}"#).unwrap();
    assert!(ExperimentConfig::load(&path).is_err());
    fs::write(&path, r#"{"train": {"learning_rat": 0.1}}"#).unwrap();
    assert!(ExperimentConfig::load(&path).is_err());
}

#[test]
fn learning_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        n: 2,
        trials: 2,
        mode: Mode::Learn,
        beam_width: Some(4),
        train: TrainConfig {
            episodes: 3,
            hidden: vec![8],
            ..TrainConfig::default()
        },
        output: dir.path().to_path_buf(),
        ..ExperimentConfig::default()
    };
    let r = run_learning_experiment(&cfg).unwrap();
    assert_eq!(r.curve.len(), 3);
    let mut rdr = csv::Reader::from_path(dir.path().join("curve.csv")).unwrap();
    let headers: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(headers[..4], ["episode", "mean_score", "std_score", "epsilon"]);
    let mut rdr = csv::Reader::from_path(dir.path().join("curve_seed1.csv")).unwrap();
    let headers: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        headers,
        ["episode", "cumulative_true_score", "cumulative_noisy_score", "epsilon", "mean_loss"]
    );
    let mean0 = (r.per_seed[0][0].cumulative_true_score + r.per_seed[1][0].cumulative_true_score) / 2.0;
    assert!((r.curve[0].mean_score - mean0).abs() < 1e-12);
}
