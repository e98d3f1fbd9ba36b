//! Independent checks: random instances, finite differences and Monte Carlo.
//!
//! Nothing here reuses the estimators under test to produce a reference
//! value. Finite differences re-solve the planning problem exactly at each
//! perturbed weight vector; Monte Carlo rolls the chain out directly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::demo::{empirical_policy, Demonstration, EmpiricalStats};
use crate::error::Result;
use crate::estimators::{fp_feature_expectations, ia_derivative, loglik_gradient, QDerivative};
use crate::features::{assemble_reward_raw, FeatureMap};
use crate::irl::{pm_gradient, pm_objective, similarity_j};
use crate::mdp::{
    boltzmann_policy, solve_optimal, BoltzmannConfig, StochasticPolicy, TabularMdp,
};

/// A reward-free MDP with features, drawn from a seed.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub mdp: TabularMdp,
    pub features: FeatureMap,
    pub theta: Vec<f64>,
    pub stats: EmpiricalStats,
}

/// Dense random transitions, features in `[0, 1)`, weights in `[-1, 1)`
/// and `n_pairs` demonstration pairs drawn uniformly.
pub fn random_instance(
    seed: u64,
    n_states: usize,
    n_actions: usize,
    n_features: usize,
    discount: f64,
    n_pairs: usize,
) -> Result<RandomInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        let row: Vec<f64> = (0..n_states).map(|_| rng.random::<f64>() + 0.05).collect();
        let s: f64 = row.iter().sum();
        transition.extend(row.iter().map(|p| p / s));
    }
    let mdp = TabularMdp::new(
        n_states,
        n_actions,
        transition,
        discount,
        vec![1.0 / n_states as f64; n_states],
    )?;
    let phi = (0..n_states * n_actions * n_features).map(|_| rng.random::<f64>()).collect();
    let features = FeatureMap::new(n_states, n_actions, n_features, phi)?;
    let theta = (0..n_features).map(|_| rng.random_range(-1.0..1.0)).collect();
    let pairs = (0..n_pairs)
        .map(|_| (rng.random_range(0..n_states), rng.random_range(0..n_actions)))
        .collect();
    let stats = empirical_policy(&Demonstration::from_pairs(pairs), n_states, n_actions)?;
    Ok(RandomInstance { mdp, features, theta, stats })
}

/// Analytic against central-difference gradient.
#[derive(Debug, Clone)]
pub struct FdReport {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// `‖analytic − numeric‖∞ / max(‖numeric‖∞, 1e-8)`.
    pub rel_error: f64,
    /// The optimal greedy policy differs at some perturbed point, so the
    /// objective is not smooth there.
    pub policy_switched: bool,
}

fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(0.0, f64::max).max(1e-8);
    diff / scale
}

/// Boltzmann and greedy policies of the exactly solved problem at `theta`.
fn exact_policies(
    mdp: &TabularMdp,
    features: &FeatureMap,
    theta: &[f64],
    cfg: &BoltzmannConfig,
) -> Result<(StochasticPolicy, StochasticPolicy)> {
    let reward = assemble_reward_raw(features, theta)?;
    let sol = solve_optimal(mdp, &reward)?;
    Ok((boltzmann_policy(&sol.q, cfg), sol.policy))
}

fn central_difference(
    inst: &RandomInstance,
    cfg: &BoltzmannConfig,
    step: f64,
    objective: impl Fn(&StochasticPolicy) -> Result<f64>,
) -> Result<(Vec<f64>, bool, StochasticPolicy, StochasticPolicy)> {
    let (boltz, greedy) = exact_policies(&inst.mdp, &inst.features, &inst.theta, cfg)?;
    let actions = greedy.greedy_actions();
    let mut switched = false;
    let mut numeric = Vec::with_capacity(inst.theta.len());
    for k in 0..inst.theta.len() {
        let mut vals = [0.0; 2];
        for (slot, sign) in vals.iter_mut().zip([1.0, -1.0]) {
            let mut th = inst.theta.clone();
            th[k] += sign * step;
            let (b, g) = exact_policies(&inst.mdp, &inst.features, &th, cfg)?;
            switched |= g.greedy_actions() != actions;
            *slot = objective(&b)?;
        }
        numeric.push((vals[0] - vals[1]) / (2.0 * step));
    }
    Ok((numeric, switched, boltz, greedy))
}

/// Checks the gradient of `J` assembled from converged fixed-point
/// feature expectations.
pub fn fd_loglik_check(inst: &RandomInstance, temperature: f64, step: f64) -> Result<FdReport> {
    let cfg = BoltzmannConfig::new(temperature)?;
    let (numeric, switched, boltz, greedy) =
        central_difference(inst, &cfg, step, |b| similarity_j(&inst.stats, b))?;
    let psi = fp_feature_expectations(&inst.mdp, &inst.features, &greedy, 1e-12, 100_000)?;
    let analytic = loglik_gradient(&inst.stats, &boltz, &psi, &cfg)?;
    Ok(FdReport {
        rel_error: rel_error(&analytic, &numeric),
        analytic,
        numeric,
        policy_switched: switched,
    })
}

/// Checks the Policy Matching ascent direction against `−∂J_PM/∂θ`.
pub fn fd_pm_check(inst: &RandomInstance, temperature: f64, step: f64) -> Result<FdReport> {
    let cfg = BoltzmannConfig::new(temperature)?;
    let (numeric, switched, boltz, greedy) =
        central_difference(inst, &cfg, step, |b| Ok(-pm_objective(&inst.stats, b)))?;
    let psi = fp_feature_expectations(&inst.mdp, &inst.features, &greedy, 1e-12, 100_000)?;
    let analytic = pm_gradient(&inst.stats, &boltz, &psi, &cfg)?;
    Ok(FdReport {
        rel_error: rel_error(&analytic, &numeric),
        analytic,
        numeric,
        policy_switched: switched,
    })
}

/// Largest entry-wise gap between converged FP and IA under the optimal
/// greedy policy at the instance's weights.
pub fn fp_ia_gap(inst: &RandomInstance, fp_tol: f64) -> Result<f64> {
    let reward = assemble_reward_raw(&inst.features, &inst.theta)?;
    let greedy = solve_optimal(&inst.mdp, &reward)?.policy;
    let fp = fp_feature_expectations(&inst.mdp, &inst.features, &greedy, fp_tol, 1_000_000)?;
    let ia = ia_derivative(&inst.mdp, &inst.features, &greedy)?;
    Ok(fp.max_abs_diff(&ia))
}

fn draw(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Monte Carlo estimate of `Φ^π(x,a) = E[Σ_t γ^t φ(x_t,a_t) | x_0=x, a_0=a]`
/// for every pair, truncating rollouts once `γ^t < truncation`.
pub fn mc_feature_expectations(
    mdp: &TabularMdp,
    features: &FeatureMap,
    policy: &StochasticPolicy,
    n_rollouts: usize,
    truncation: f64,
    seed: u64,
) -> Result<QDerivative> {
    features.check_mdp(mdp)?;
    let (n, m, k) = (mdp.n_states(), mdp.n_actions(), features.n_features());
    let gamma = mdp.discount();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; n * m * k];
    for x0 in 0..n {
        for a0 in 0..m {
            let acc = &mut values[(x0 * m + a0) * k..][..k];
            for _ in 0..n_rollouts {
                let (mut x, mut a, mut g) = (x0, a0, 1.0);
                while g >= truncation {
                    for (s, f) in acc.iter_mut().zip(features.pair(x, a)) {
                        *s += g * f;
                    }
                    x = draw(&mut rng, mdp.transition_row(x, a));
                    a = draw(&mut rng, policy.row(x));
                    g *= gamma;
                }
            }
            acc.iter_mut().for_each(|s| *s /= n_rollouts as f64);
        }
    }
    QDerivative::from_parts(n, m, k, values)
}

/// Monte Carlo estimate of `V^π(x)` under `reward_of(x, a)`.
pub fn mc_policy_value(
    mdp: &TabularMdp,
    reward_of: impl Fn(usize, usize) -> f64,
    policy: &StochasticPolicy,
    n_rollouts: usize,
    truncation: f64,
    seed: u64,
) -> Vec<f64> {
    let gamma = mdp.discount();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..mdp.n_states())
        .map(|x0| {
            let mut total = 0.0;
            for _ in 0..n_rollouts {
                let (mut x, mut g) = (x0, 1.0);
                while g >= truncation {
                    let a = draw(&mut rng, policy.row(x));
                    total += g * reward_of(x, a);
                    x = draw(&mut rng, mdp.transition_row(x, a));
                    g *= gamma;
                }
            }
            total / n_rollouts as f64
        })
        .collect()
}

/// One line of the oracle suite.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Finite-difference, FP/IA and Monte Carlo checks on seeded random
/// instances.
pub fn run_oracle_suite() -> Result<Vec<OracleReport>> {
    let mut reports = Vec::new();

    let mut worst = 0.0f64;
    let mut used = 0;
    let mut worst_gap = 0.0f64;
    for seed in 0..20 {
        let inst = random_instance(seed, 5, 3, 4, 0.9, 60)?;
        let fd = fd_loglik_check(&inst, 1.0, 1e-5)?;
        if !fd.policy_switched {
            used += 1;
            worst = worst.max(fd.rel_error);
        }
        worst_gap = worst_gap.max(fp_ia_gap(&inst, 1e-10)?);
    }
    reports.push(OracleReport {
        name: "loglik gradient vs finite differences",
        passed: worst <= 1e-3 && used > 0,
        detail: format!("{used} smooth instances, worst relative error {worst:.3e}"),
    });
    reports.push(OracleReport {
        name: "FP vs IA",
        passed: worst_gap <= 1e-6,
        detail: format!("worst entry gap {worst_gap:.3e}"),
    });

    let mut worst_pm = 0.0f64;
    for seed in 0..20 {
        let inst = random_instance(100 + seed, 5, 3, 4, 0.9, 60)?;
        let fd = fd_pm_check(&inst, 1.0, 1e-5)?;
        if !fd.policy_switched {
            worst_pm = worst_pm.max(fd.rel_error);
        }
    }
    reports.push(OracleReport {
        name: "PM gradient vs finite differences",
        passed: worst_pm <= 1e-3,
        detail: format!("worst relative error {worst_pm:.3e}"),
    });

    let mut worst_mc = 0.0f64;
    for seed in 0..5 {
        let inst = random_instance(200 + seed, 4, 3, 3, 0.7, 1)?;
        let reward = assemble_reward_raw(&inst.features, &inst.theta)?;
        let greedy = solve_optimal(&inst.mdp, &reward)?.policy;
        let fp = fp_feature_expectations(&inst.mdp, &inst.features, &greedy, 1e-12, 100_000)?;
        let mc = mc_feature_expectations(&inst.mdp, &inst.features, &greedy, 100_000, 1e-6, seed)?;
        worst_mc = worst_mc.max(fp.max_abs_diff(&mc));
    }
    reports.push(OracleReport {
        name: "FP vs Monte Carlo",
        passed: worst_mc <= 1e-2,
        detail: format!("worst entry gap {worst_mc:.3e}"),
    });
    Ok(reports)
}
