use mlirl::demo::{parse_demonstration, write_demonstration, Demonstration};
use mlirl::env::{build_named, parse_bundle, write_bundle};
use mlirl::error::IrlError;
use mlirl::estimators::EstimatorKind;
use mlirl::harness::output::{format_iterations_csv, format_summary_csv};
use mlirl::harness::{
    emit_outputs, parse_config_text, parse_metrics_csv, parse_summary_csv, run_experiment_on,
    summarize, ExperimentConfig, MetricsRow, PreparedEnv,
};
use mlirl::irl::Algorithm;
use proptest::prelude::*;

fn small(alg: Algorithm, est: EstimatorKind) -> (PreparedEnv, ExperimentConfig) {
    let env = PreparedEnv::named("narrow-passage-2x2").unwrap();
    let mut cfg = ExperimentConfig::for_env("narrow-passage-2x2", alg, est).unwrap();
    cfg.n_repeats = 3;
    cfg.irl.n_iterations = 4;
    cfg.n_traj = 15;
    cfg.record_timing = false;
    (env, cfg)
}

#[test]
fn one_row_per_iteration_per_repeat() {
    let (env, cfg) = small(Algorithm::Pm, EstimatorKind::Fp1);
    let out = run_experiment_on(&env, &cfg).unwrap();
    assert_eq!(out.rows.len(), 12);
    assert!(out.failures.is_empty());
    for (i, row) in out.rows.iter().enumerate() {
        assert_eq!((row.run_id, row.iteration), (i / 4, i % 4));
        assert_eq!(row.iter_wall_ms, 0.0);
    }
    let summary = out.summary();
    assert_eq!(summary.len(), 1);
    assert_eq!((summary[0].n_repeats, summary[0].failures), (3, 0));
}

#[test]
fn summary_uses_final_rows() {
    let row = |run_id, iteration, value_true| MetricsRow {
        run_id,
        algorithm: Algorithm::Girl,
        estimator: EstimatorKind::Ia,
        iteration,
        loglik: -1.0,
        similarity_j: -0.5,
        value_true,
        value_expert: 1.0,
        policy_agreement: 0.5,
        iter_wall_ms: 1000.0,
    };
    let rows = vec![row(0, 0, 9.0), row(0, 1, 1.0), row(1, 0, 9.0), row(1, 1, 3.0)];
    let s = &summarize(&rows, &[])[0];
    assert_eq!(s.mean_value_true, 2.0);
    assert!((s.sd_value_true - 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(s.mean_total_s, 2.0);
}

#[test]
fn identical_seeds_write_identical_files() {
    let (env, cfg) = small(Algorithm::Mwal, EstimatorKind::Ia);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut written = Vec::new();
    for d in &dirs {
        let out = run_experiment_on(&env, &cfg).unwrap();
        written.push(emit_outputs(&out, d.path()).unwrap());
    }
    assert_eq!(written[0].len(), written[1].len());
    for (a, b) in written[0].iter().zip(&written[1]) {
        assert_eq!(a.file_name(), b.file_name());
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }
}

#[test]
fn different_seeds_sample_different_demonstrations() {
    let (env, mut cfg) = small(Algorithm::Girl, EstimatorKind::Fp);
    cfg.n_repeats = 1;
    let a = run_experiment_on(&env, &cfg).unwrap();
    cfg.irl.seed = 99;
    let b = run_experiment_on(&env, &cfg).unwrap();
    assert_ne!(format_iterations_csv(&a.rows), format_iterations_csv(&b.rows));
}

#[test]
fn config_errors_name_the_line() {
    let err = parse_config_text("env = paths-10x10\nbogus line\n").unwrap_err();
    assert!(matches!(err, IrlError::Parse { line: 2, .. }), "{err:?}");
    assert!(parse_config_text("colour = red\n").is_err());
    let raw = parse_config_text("# comment\nenv = sailing-small\nalgorithm = pm\n").unwrap();
    let cfg = ExperimentConfig::resolve(&raw).unwrap();
    assert_eq!(cfg.irl.algorithm, Algorithm::Pm);
}

#[test]
fn bundles_round_trip() {
    for name in ["narrow-passage-2x2", "sailing-small"] {
        let b = build_named(name).unwrap();
        assert_eq!(parse_bundle(&write_bundle(&b)).unwrap(), b);
    }
}

fn arb_row() -> impl Strategy<Value = MetricsRow> {
    (
        0usize..50,
        prop::sample::select(Algorithm::ALL.to_vec()),
        prop::sample::select(EstimatorKind::ALL.to_vec()),
        0usize..500,
        prop::array::uniform6(-1e9f64..1e9),
    )
        .prop_map(|(run_id, algorithm, estimator, iteration, v)| MetricsRow {
            run_id,
            algorithm,
            estimator,
            iteration,
            loglik: v[0],
            similarity_j: v[1],
            value_true: v[2],
            value_expert: v[3],
            policy_agreement: v[4].abs() / 1e9,
            iter_wall_ms: v[5].abs(),
        })
}

proptest! {
    #[test]
    fn metrics_csv_is_lossless(rows in prop::collection::vec(arb_row(), 0..20)) {
        prop_assert_eq!(parse_metrics_csv(&format_iterations_csv(&rows)).unwrap(), rows);
    }

    #[test]
    fn summary_csv_is_lossless(rows in prop::collection::vec(arb_row(), 1..20)) {
        let summary = summarize(&rows, &[]);
        prop_assert_eq!(parse_summary_csv(&format_summary_csv(&summary)).unwrap(), summary);
    }

    #[test]
    fn demonstrations_round_trip(lengths in prop::collection::vec(0usize..6, 1..8), seed in 0usize..1000) {
        let m: usize = lengths.iter().sum();
        let pairs = (0..m).map(|i| ((i * 7 + seed) % 13, (i + seed) % 4)).collect();
        let demo = Demonstration::new(pairs, lengths).unwrap();
        prop_assert_eq!(parse_demonstration(&write_demonstration(&demo)).unwrap(), demo);
    }
}
