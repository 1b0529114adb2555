use std::fs::File;

use valab_bench::config::{Algorithm, ExperimentConfig, Mode};
use valab_bench::experiment::{final_values, mean_std, run_experiment, run_sweep, summarize, write_run, write_sweep};
use valab_bench::generate::Bundle;
use valab_bench::verify::{run_verify, Level};
use valab_core::analysis::{read_metric_csv, Metric};

fn small(mode: Mode) -> ExperimentConfig {
    ExperimentConfig {
        num_states: 6,
        num_actions: 3,
        gamma: 0.9,
        mode,
        n_traj: 4,
        horizon: Some(25),
        iterations: 40,
        eval_every: 10,
        seeds: vec![0, 1, 2],
        ..ExperimentConfig::default()
    }
}

#[test]
fn run_writes_identical_csvs_twice() {
    let tmp = tempfile::tempdir().unwrap();
    for mode in [Mode::Control, Mode::Evaluation] {
        let cfg = small(mode);
        let (a, b) = (tmp.path().join(format!("{}-a", mode.name())), tmp.path().join(format!("{}-b", mode.name())));
        let ma = write_run(&cfg, &run_experiment(&cfg).unwrap(), &a).unwrap();
        write_run(&cfg, &run_experiment(&cfg).unwrap(), &b).unwrap();
        assert_eq!(ma.artifacts.len(), cfg.effective_metrics().len());
        for name in &ma.artifacts {
            assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
        }
    }
}

#[test]
fn written_metrics_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(Mode::Evaluation);
    let records = run_experiment(&cfg).unwrap();
    write_run(&cfg, &records, tmp.path()).unwrap();
    let mut back = Vec::new();
    for metric in cfg.effective_metrics() {
        back.extend(read_metric_csv(File::open(tmp.path().join(format!("metrics_{}.csv", metric.name()))).unwrap()).unwrap());
    }
    assert_eq!(back.len(), records.len());
    for r in &records {
        assert!(back.contains(r), "{r:?}");
    }
}

#[test]
fn zero_iterations_logs_only_initial_values() {
    let cfg = ExperimentConfig { iterations: 0, ..small(Mode::Control) };
    let records = run_experiment(&cfg).unwrap();
    assert!(!records.is_empty());
    assert!(records.iter().all(|r| r.iteration == 0));
    // one row per (seed, algorithm, emitted metric)
    let per_seed: usize = cfg.algorithms.iter().map(|a| cfg.effective_metrics().iter().filter(|m| a.emits(**m)).count()).sum();
    assert_eq!(records.len(), per_seed * cfg.seeds.len());
}

#[test]
fn single_point_sweep_matches_run_summary() {
    for eps in [0.0, 0.8] {
        let run_cfg = ExperimentConfig { epsilon: Some(eps), metrics: Some(vec![Metric::Performance]), ..small(Mode::Control) };
        let expected = summarize(&run_experiment(&run_cfg).unwrap(), Metric::Performance, eps, run_cfg.iterations);
        let sweep = run_sweep(&ExperimentConfig { epsilon_grid: vec![eps], ..small(Mode::Control) }).unwrap();
        assert_eq!(sweep.summary, expected);
    }
}

#[test]
fn full_grid_summary_has_a_row_per_cell() {
    let cfg = ExperimentConfig { iterations: 10, seeds: vec![0, 1], ..small(Mode::Control) };
    let out = run_sweep(&cfg).unwrap();
    assert_eq!(out.summary.len(), 6 * 4);
    assert_eq!(out.raw.len(), 6 * 4 * 2);
    for eps in &cfg.epsilon_grid {
        for alg in &cfg.algorithms {
            assert!(out.summary.iter().any(|r| r.epsilon == *eps && r.algorithm == alg.name()));
        }
    }
}

#[test]
fn summary_is_recomputable_from_raw_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { epsilon_grid: vec![0.2, 1.0], ..small(Mode::Control) };
    let out = run_sweep(&cfg).unwrap();
    write_sweep(&cfg, &out, tmp.path()).unwrap();
    let raw = read_metric_csv(File::open(tmp.path().join("sweep_raw.csv")).unwrap()).unwrap();
    let mut rd = csv::Reader::from_path(tmp.path().join("sweep_summary.csv")).unwrap();
    let mut rows = 0;
    for row in rd.records() {
        let row = row.unwrap();
        let eps: f64 = row[0].parse().unwrap();
        let run = format!("control-eps{eps}");
        let vals: Vec<f64> = raw.iter().filter(|r| r.run_id == run && r.algorithm == row[1]).map(|r| r.value).collect();
        let (mean, std) = mean_std(&vals);
        assert!((mean - row[3].parse::<f64>().unwrap()).abs() <= 1e-12 * mean.abs().max(1.0));
        assert!((std - row[4].parse::<f64>().unwrap()).abs() <= 1e-12 * std.abs().max(1.0));
        assert_eq!(row[5].parse::<usize>().unwrap(), vals.len());
        rows += 1;
    }
    assert_eq!(rows, out.summary.len());
}

#[test]
fn final_values_pair_seeds_in_config_order() {
    let cfg = ExperimentConfig { seeds: vec![4, 1, 9], ..small(Mode::Control) };
    let records = run_experiment(&cfg).unwrap();
    for (_, runs) in final_values(&records, Metric::Performance, cfg.iterations) {
        assert_eq!(runs.iter().map(|r| r.0).collect::<Vec<_>>(), vec![4, 1, 9]);
    }
}

#[test]
fn bundle_round_trips_through_disk() {
    let tmp = tempfile::tempdir().unwrap();
    for mode in [Mode::Control, Mode::Evaluation] {
        let bundle = Bundle::generate(&small(mode), 3).unwrap();
        bundle.validate().unwrap();
        let path = bundle.write(tmp.path()).unwrap();
        assert_eq!(Bundle::read(&path).unwrap(), bundle);
        assert_eq!(bundle.target.is_some(), mode == Mode::Evaluation);
    }
}

#[test]
fn fast_verification_passes() {
    let outcomes = run_verify(Level::Fast, 0);
    assert!(outcomes.len() >= 8);
    for o in outcomes {
        assert!(o.passed, "{o}");
    }
}

#[test]
fn dueling_learners_alone_emit_advantage_norms() {
    let cfg = ExperimentConfig { algorithms: vec![Algorithm::QLearning, Algorithm::DuelingBehavior], ..small(Mode::Control) };
    let records = run_experiment(&cfg).unwrap();
    assert!(records.iter().filter(|r| r.metric == Metric::AdvNormMu).all(|r| r.algorithm == "dueling_behavior"));
    assert!(records.iter().any(|r| r.metric == Metric::AdvNormMu));
}
