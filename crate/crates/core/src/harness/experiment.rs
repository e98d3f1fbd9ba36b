//! Seeded repeats of expert solve, demonstration sampling and IRL.

use crate::demo::{empirical_policy, sample_trajectories, ExpertMode};
use crate::env::{build_named, EnvironmentBundle};
use crate::error::{IrlError, Result};
use crate::estimators::EstimatorKind;
use crate::harness::config::ExperimentConfig;
use crate::harness::metrics::ExpertReference;
use crate::irl::{run_irl, Algorithm, IrlConfig, IrlResult, RewardlessMdp};
use crate::mdp::{boltzmann_policy, BoltzmannConfig, StochasticPolicy};

/// One line of the per-iteration CSV.
///
/// Metrics at iteration `t` describe the incumbent: the best iterate so far
/// by the algorithm's own objective. Only the wall time belongs to iterate
/// `t` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub run_id: usize,
    pub algorithm: Algorithm,
    pub estimator: EstimatorKind,
    pub iteration: usize,
    pub loglik: f64,
    pub similarity_j: f64,
    pub value_true: f64,
    pub value_expert: f64,
    pub policy_agreement: f64,
    pub iter_wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub estimator: EstimatorKind,
    pub mean_value_true: f64,
    pub sd_value_true: f64,
    pub mean_agreement: f64,
    pub sd_agreement: f64,
    pub mean_total_s: f64,
    /// Completed repeats.
    pub n_repeats: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub run_id: usize,
    pub algorithm: Algorithm,
    pub estimator: EstimatorKind,
    /// Iteration at which the run aborted, when known.
    pub iteration: Option<usize>,
    pub message: String,
    /// The root cause was a solver that failed to converge.
    pub non_convergence: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<MetricsRow>,
    pub failures: Vec<RunFailure>,
}

impl ExperimentOutput {
    pub fn extend(&mut self, other: ExperimentOutput) {
        self.rows.extend(other.rows);
        self.failures.extend(other.failures);
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        summarize(&self.rows, &self.failures)
    }
}

/// Everything that does not depend on the seed.
pub struct PreparedEnv {
    pub bundle: EnvironmentBundle,
    pub expert: ExpertReference,
}

impl PreparedEnv {
    pub fn new(bundle: EnvironmentBundle) -> Result<Self> {
        let expert = ExpertReference::solve(&bundle)?;
        Ok(PreparedEnv { bundle, expert })
    }

    pub fn named(name: &str) -> Result<Self> {
        PreparedEnv::new(build_named(name)?)
    }

    fn demo_policy(&self, mode: ExpertMode) -> Result<StochasticPolicy> {
        match mode {
            ExpertMode::Greedy => Ok(self.expert.solution.policy.clone()),
            ExpertMode::Boltzmann { temperature } => Ok(boltzmann_policy(
                &self.expert.solution.q,
                &BoltzmannConfig::new(temperature)?,
            )),
        }
    }
}

/// Outcome of a single seeded repeat.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub result: IrlResult,
    pub rows: Vec<MetricsRow>,
}

/// Samples a demonstration with `seed`, runs the algorithm and scores every
/// iteration against the expert.
pub fn run_repeat(
    env: &PreparedEnv,
    cfg: &ExperimentConfig,
    run_id: usize,
    seed: u64,
) -> Result<RunOutcome> {
    let bundle = &env.bundle;
    let policy = env.demo_policy(cfg.expert)?;
    let demo = sample_trajectories(bundle, &policy, cfg.n_traj, cfg.horizon, seed)?;
    let stats = empirical_policy(&demo, bundle.mdp.n_states(), bundle.mdp.n_actions())?;
    let irl = IrlConfig { seed, ..cfg.irl.clone() };
    let result = run_irl(RewardlessMdp::from_bundle(bundle), &stats, &demo, &irl)?;

    let n_actions = bundle.mdp.n_actions();
    let mut rows = Vec::with_capacity(result.trace.len());
    let mut cache: Option<(usize, f64, f64)> = None;
    for (t, rec) in result.trace.records.iter().enumerate() {
        let inc = &result.trace.records[rec.incumbent];
        let (value_true, agreement) = match cache {
            Some((i, v, a)) if i == rec.incumbent => (v, a),
            _ => {
                let greedy = StochasticPolicy::deterministic(n_actions, &inc.greedy)?;
                let (v, a) = env.expert.evaluate(bundle, &greedy)?;
                cache = Some((rec.incumbent, v, a));
                (v, a)
            }
        };
        rows.push(MetricsRow {
            run_id,
            algorithm: irl.algorithm,
            estimator: irl.estimator.kind,
            iteration: t,
            loglik: inc.loglik,
            similarity_j: inc.similarity,
            value_true,
            value_expert: env.expert.value,
            policy_agreement: agreement,
            iter_wall_ms: if cfg.record_timing {
                rec.wall.as_secs_f64() * 1e3
            } else {
                0.0
            },
        });
    }
    Ok(RunOutcome { result, rows })
}

/// Repeat `i` uses seed `cfg.irl.seed + i`. A failing repeat is recorded and
/// the remaining repeats still run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let env = PreparedEnv::named(&cfg.env)?;
    run_experiment_on(&env, cfg)
}

pub fn run_experiment_on(env: &PreparedEnv, cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut out = ExperimentOutput::default();
    for i in 0..cfg.n_repeats {
        let seed = cfg.irl.seed.wrapping_add(i as u64);
        match run_repeat(env, cfg, i, seed) {
            Ok(run) => out.rows.extend(run.rows),
            Err(e) => out.failures.push(RunFailure {
                run_id: i,
                algorithm: cfg.irl.algorithm,
                estimator: cfg.irl.estimator.kind,
                iteration: match &e {
                    IrlError::AtIteration { iteration, .. } => Some(*iteration),
                    _ => None,
                },
                message: e.to_string(),
                non_convergence: matches!(e.root(), IrlError::NonConvergence { .. }),
            }),
        }
    }
    Ok(out)
}

/// Sample mean and standard deviation; the deviation is 0 for one sample.
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Groups by (algorithm, estimator) in order of first appearance and
/// aggregates the final-iteration row of every run.
pub fn summarize(rows: &[MetricsRow], failures: &[RunFailure]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Algorithm, EstimatorKind)> = Vec::new();
    let keyed = rows
        .iter()
        .map(|r| (r.algorithm, r.estimator))
        .chain(failures.iter().map(|f| (f.algorithm, f.estimator)));
    for k in keyed {
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(alg, est)| {
            // run_id -> (final row, total ms)
            let mut runs: Vec<(usize, &MetricsRow, f64)> = Vec::new();
            for r in rows.iter().filter(|r| r.algorithm == alg && r.estimator == est) {
                match runs.iter_mut().find(|(id, _, _)| *id == r.run_id) {
                    Some(entry) => {
                        if r.iteration >= entry.1.iteration {
                            entry.1 = r;
                        }
                        entry.2 += r.iter_wall_ms;
                    }
                    None => runs.push((r.run_id, r, r.iter_wall_ms)),
                }
            }
            let values: Vec<f64> = runs.iter().map(|r| r.1.value_true).collect();
            let agreements: Vec<f64> = runs.iter().map(|r| r.1.policy_agreement).collect();
            let totals: Vec<f64> = runs.iter().map(|r| r.2 / 1e3).collect();
            let (mean_value_true, sd_value_true) = mean_sd(&values);
            let (mean_agreement, sd_agreement) = mean_sd(&agreements);
            SummaryRow {
                algorithm: alg,
                estimator: est,
                mean_value_true,
                sd_value_true,
                mean_agreement,
                sd_agreement,
                mean_total_s: mean_sd(&totals).0,
                n_repeats: runs.len(),
                failures: failures
                    .iter()
                    .filter(|f| f.algorithm == alg && f.estimator == est)
                    .count(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_statistics() {
        assert_eq!(mean_sd(&[3.0]), (3.0, 0.0));
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(mean_sd(&[]).0.is_nan());
    }

    #[test]
    fn single_iteration_counting() {
        let mut cfg =
            ExperimentConfig::for_env("narrow-passage-2x2", Algorithm::Girl, EstimatorKind::Fp1).unwrap();
        cfg.n_repeats = 1;
        cfg.irl.n_iterations = 1;
        cfg.n_traj = 5;
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.rows.len(), 1);
        let summary = out.summary();
        assert_eq!(summary.len(), 1);
        assert_eq!(summary[0].n_repeats, 1);
        assert_eq!(summary[0].sd_value_true, 0.0);
        let r = &out.rows[0];
        assert!(r.value_true <= r.value_expert + 1e-9);
        assert!((0.0..=1.0).contains(&r.policy_agreement));
    }

    #[test]
    fn failures_are_recorded() {
        let mut cfg =
            ExperimentConfig::for_env("narrow-passage-2x2", Algorithm::Girl, EstimatorKind::Fp).unwrap();
        cfg.n_repeats = 2;
        cfg.irl.n_iterations = 3;
        cfg.n_traj = 3;
        cfg.irl.estimator.fp_max_iter = 1;
        let out = run_experiment(&cfg).unwrap();
        assert!(out.rows.is_empty());
        assert_eq!(out.failures.len(), 2);
        assert_eq!(out.failures[0].iteration, Some(0));
        assert!(out.failures[0].non_convergence);
        let s = out.summary();
        assert_eq!((s[0].n_repeats, s[0].failures), (0, 2));
    }
}
