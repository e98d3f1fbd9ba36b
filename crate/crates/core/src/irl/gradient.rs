//! Normalized projected gradient ascent shared by GIRL and Policy Matching.

use std::time::Instant;

use super::{similarity_j_from_q, IrlConfig, IrlResult, IterationRecord, IterationTrace, RewardlessMdp};
use crate::demo::EmpiricalStats;
use crate::error::{IrlError, Result};
use crate::estimators::{loglik_gradient, pair_likelihood_gradient, QDerivative};
use crate::features::{assemble_reward_raw, project_weights, WeightVector};
use crate::mdp::{
    boltzmann_policy, greedy_policy, q_from_v, value_iteration_from, BoltzmannConfig,
    StochasticPolicy, ValueFunction, VI_DEFAULT_MAX_ITER,
};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Objective {
    Likelihood,
    PolicyMatching,
}

/// `J_PM(θ) = Σ_x μ_E(x) Σ_a (π̂_E(a|x) − π_θ(a|x))²`.
pub fn pm_objective(stats: &EmpiricalStats, boltzmann: &StochasticPolicy) -> f64 {
    let mut j = 0.0;
    for (x, &mu) in stats.visitation.iter().enumerate() {
        if mu == 0.0 {
            continue;
        }
        for (e, p) in stats.policy.row(x).iter().zip(boltzmann.row(x)) {
            j += mu * (e - p) * (e - p);
        }
    }
    j
}

/// Ascent direction `−∇J_PM = 2 Σ μ_E (π̂_E − π_θ) ∂π_θ/∂θ`.
pub fn pm_gradient(
    stats: &EmpiricalStats,
    boltzmann: &StochasticPolicy,
    q_deriv: &QDerivative,
    cfg: &BoltzmannConfig,
) -> Result<Vec<f64>> {
    if stats.visitation.len() != q_deriv.n_states() || boltzmann.n_states() != q_deriv.n_states() {
        return Err(IrlError::DimensionMismatch(
            "statistics, policy and derivative disagree on dimensions".into(),
        ));
    }
    let mut g = vec![0.0; q_deriv.n_features()];
    for (x, &mu) in stats.visitation.iter().enumerate() {
        if mu == 0.0 {
            continue;
        }
        for a in 0..q_deriv.n_actions() {
            let diff = stats.policy.get(x, a) - boltzmann.get(x, a);
            if diff == 0.0 {
                continue;
            }
            let d = pair_likelihood_gradient(q_deriv, boltzmann, cfg, x, a);
            for (gk, dk) in g.iter_mut().zip(d) {
                *gk += 2.0 * mu * diff * dk;
            }
        }
    }
    Ok(g)
}

/// Maximum-likelihood IRL: ascend `J` (equivalently `log L`).
pub fn run_girl(
    problem: RewardlessMdp<'_>,
    stats: &EmpiricalStats,
    cfg: &IrlConfig,
) -> Result<IrlResult> {
    ascend(problem, stats, cfg, Objective::Likelihood)
}

/// Policy Matching: ascend `−J_PM`.
pub fn run_pm(problem: RewardlessMdp<'_>, stats: &EmpiricalStats, cfg: &IrlConfig) -> Result<IrlResult> {
    ascend(problem, stats, cfg, Objective::PolicyMatching)
}

struct Step {
    theta: Vec<f64>,
    direction: Vec<f64>,
    objective: f64,
}

fn ascend(
    problem: RewardlessMdp<'_>,
    stats: &EmpiricalStats,
    cfg: &IrlConfig,
    objective: Objective,
) -> Result<IrlResult> {
    cfg.validate()?;
    let mdp = problem.mdp;
    let features = problem.features;
    features.check_mdp(mdp)?;
    if stats.visitation.len() != mdp.n_states() || stats.policy.n_actions() != mdp.n_actions() {
        return Err(IrlError::DimensionMismatch("statistics do not match the MDP".into()));
    }
    let boltz_cfg = BoltzmannConfig::new(cfg.temperature)?;
    let m = stats.n_pairs as f64;

    let mut weights = WeightVector::uniform(features.n_features(), cfg.constraint_mode, problem.costs_only)?;
    let mut v = ValueFunction::zeros(mdp.n_states());
    let mut trace = IterationTrace::default();
    let mut best: Option<(usize, f64, WeightVector, StochasticPolicy, StochasticPolicy)> = None;
    let mut prev: Option<Step> = None;
    let mut step_size = cfg.step_size;

    for t in 0..cfg.n_iterations {
        let started = Instant::now();
        let inner = || -> Result<_> {
            let reward = assemble_reward_raw(features, weights.theta())?;
            let v_next = value_iteration_from(mdp, &reward, &v, cfg.vi_tol, VI_DEFAULT_MAX_ITER)?;
            let q = q_from_v(mdp, &reward, &v_next)?;
            let boltzmann = boltzmann_policy(&q, &boltz_cfg);
            let greedy = greedy_policy(&q);
            let psi = cfg.estimator.estimate(mdp, features, &greedy)?;
            let similarity = similarity_j_from_q(stats, &q, &boltz_cfg)?;
            let (obj, grad) = match objective {
                Objective::Likelihood => (
                    similarity,
                    loglik_gradient(stats, &boltzmann, &psi, &boltz_cfg)?,
                ),
                Objective::PolicyMatching => (
                    -pm_objective(stats, &boltzmann),
                    pm_gradient(stats, &boltzmann, &psi, &boltz_cfg)?,
                ),
            };
            Ok((v_next, boltzmann, greedy, similarity, obj, grad))
        };
        let (v_next, boltzmann, greedy, similarity, obj, grad) =
            inner().map_err(|e| e.at_iteration(t))?;
        v = v_next;

        let improved = best.as_ref().is_none_or(|b| obj > b.1);
        if improved {
            best = Some((t, obj, weights.clone(), boltzmann.clone(), greedy.clone()));
        }
        let incumbent = best.as_ref().map_or(t, |b| b.0);

        // next iterate
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let direction: Vec<f64> = if norm > 0.0 && norm.is_finite() {
            grad.iter().map(|g| g / norm).collect()
        } else {
            vec![0.0; grad.len()]
        };
        let rejected = cfg.backtracking && prev.as_ref().is_some_and(|p| obj < p.objective);
        let base = if rejected {
            step_size *= 0.5;
            prev.as_ref().expect("checked above")
        } else {
            prev = Some(Step {
                theta: weights.theta().to_vec(),
                direction,
                objective: obj,
            });
            prev.as_ref().expect("just set")
        };
        let raw: Vec<f64> = base
            .theta
            .iter()
            .zip(&base.direction)
            .map(|(th, d)| th + step_size * d)
            .collect();
        let next = project_weights(&raw, cfg.constraint_mode).map_err(|e| e.at_iteration(t))?;

        trace.records.push(IterationRecord {
            theta: weights.theta().to_vec(),
            loglik: m * similarity,
            similarity,
            objective: obj,
            greedy: greedy.greedy_actions(),
            incumbent,
            wall: started.elapsed(),
        });
        weights = next;
    }

    let (best_iteration, _, final_weights, final_policy, greedy_policy) =
        best.expect("at least one iteration ran");
    Ok(IrlResult {
        final_weights,
        final_policy,
        greedy_policy,
        best_iteration,
        trace,
    })
}
