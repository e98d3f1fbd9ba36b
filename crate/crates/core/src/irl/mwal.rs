//! Multiplicative Weights Apprenticeship Learning over the same estimators.

use std::time::Instant;

use super::{similarity_j_from_q, IrlConfig, IrlResult, IterationRecord, IterationTrace, RewardlessMdp};
use crate::demo::{empirical_feature_expectations, Demonstration, EmpiricalStats};
use crate::error::{IrlError, Result};
use crate::features::{assemble_reward_raw, project_weights, ConstraintMode, FeatureMap};
use crate::mdp::{
    greedy_policy, q_from_v, value_iteration_from, BoltzmannConfig,
    StochasticPolicy, ValueFunction, VI_DEFAULT_MAX_ITER,
};

/// Divides every feature by its maximum so values lie in `[0, 1]`.
fn rescale(features: &FeatureMap) -> Result<(FeatureMap, Vec<f64>)> {
    let k = features.n_features();
    let mut scale = vec![0.0f64; k];
    for (i, &v) in features.as_slice().iter().enumerate() {
        if v < 0.0 {
            return Err(IrlError::InvalidInput(
                "multiplicative weights need nonnegative features".into(),
            ));
        }
        scale[i % k] = scale[i % k].max(v);
    }
    scale.iter_mut().filter(|s| **s == 0.0).for_each(|s| *s = 1.0);
    let values = features
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, v)| v / scale[i % k])
        .collect();
    let scaled = FeatureMap::new(features.n_states(), features.n_actions(), k, values)?;
    Ok((scaled, scale))
}

/// Runs `cfg.n_iterations` rounds; the returned policy is the uniform mixture
/// of the per-round greedy policies.
pub fn run_mwal(
    problem: RewardlessMdp<'_>,
    stats: &EmpiricalStats,
    demo: &Demonstration,
    cfg: &IrlConfig,
) -> Result<IrlResult> {
    cfg.validate()?;
    let mdp = problem.mdp;
    problem.features.check_mdp(mdp)?;
    let (features, scale) = rescale(problem.features)?;
    let k = features.n_features();
    let gamma = mdp.discount();
    let sign = if problem.costs_only { -1.0 } else { 1.0 };
    let boltz_cfg = BoltzmannConfig::new(cfg.temperature)?;

    let mu_expert = empirical_feature_expectations(demo, &features, gamma)?;
    let t_total = cfg.n_iterations as f64;
    let beta = 1.0 / (1.0 + (2.0 * (k as f64).ln() / t_total).sqrt());

    let mut w_raw = vec![1.0; k];
    let mut w_sum = vec![0.0; k];
    let mut v = ValueFunction::zeros(mdp.n_states());
    let mut policies: Vec<StochasticPolicy> = Vec::with_capacity(cfg.n_iterations);
    let mut trace = IterationTrace::default();
    let mut mixture = StochasticPolicy::uniform(mdp.n_states(), mdp.n_actions());

    for t in 0..cfg.n_iterations {
        let started = Instant::now();
        let total: f64 = w_raw.iter().sum();
        let w: Vec<f64> = w_raw.iter().map(|x| x / total).collect();
        let theta: Vec<f64> = w.iter().map(|x| sign * x).collect();
        let inner = || -> Result<_> {
            let reward = assemble_reward_raw(&features, &theta)?;
            let v_next = value_iteration_from(mdp, &reward, &v, cfg.vi_tol, VI_DEFAULT_MAX_ITER)?;
            let q = q_from_v(mdp, &reward, &v_next)?;
            let greedy = greedy_policy(&q);
            let psi = cfg.estimator.estimate(mdp, &features, &greedy)?;
            let similarity = similarity_j_from_q(stats, &q, &boltz_cfg)?;
            Ok((v_next, greedy, psi, similarity))
        };
        let (v_next, greedy, psi, similarity) = inner().map_err(|e| e.at_iteration(t))?;
        v = v_next;

        let mut mu = vec![0.0; k];
        for (x, &d0) in mdp.initial_dist().iter().enumerate() {
            if d0 == 0.0 {
                continue;
            }
            for (a, &p) in greedy.row(x).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for (m, q) in mu.iter_mut().zip(psi.pair(x, a)) {
                    *m += d0 * p * q;
                }
            }
        }
        for i in 0..k {
            let g = ((1.0 - gamma) * sign * (mu[i] - mu_expert[i]) + 2.0) / 4.0;
            w_raw[i] *= beta.powf(g);
            w_sum[i] += w[i];
        }
        let top = w_raw.iter().copied().fold(0.0, f64::max);
        if top > 0.0 {
            w_raw.iter_mut().for_each(|x| *x /= top);
        }

        policies.push(greedy);
        mixture = StochasticPolicy::mixture(&policies).map_err(|e| e.at_iteration(t))?;
        trace.records.push(IterationRecord {
            theta,
            loglik: stats.n_pairs as f64 * similarity,
            similarity,
            objective: similarity,
            greedy: mixture.greedy_actions(),
            incumbent: t,
            wall: started.elapsed(),
        });
    }

    let n = cfg.n_iterations as f64;
    let mean: Vec<f64> = w_sum.iter().zip(&scale).map(|(w, c)| w / n / c).collect();
    let raw: Vec<f64> = match cfg.constraint_mode {
        ConstraintMode::NonnegSimplex => mean,
        _ => mean.iter().map(|w| sign * w).collect(),
    };
    let final_weights = project_weights(&raw, cfg.constraint_mode)?;
    let greedy_policy = StochasticPolicy::deterministic(mdp.n_actions(), &mixture.greedy_actions())?;
    Ok(IrlResult {
        final_weights,
        final_policy: mixture,
        greedy_policy,
        best_iteration: cfg.n_iterations - 1,
        trace,
    })
}
