//! GIRL, Policy Matching and MWAL, each generic over the derivative
//! estimator.

mod gradient;
mod mwal;

pub use gradient::{pm_gradient, pm_objective, run_girl, run_pm};
pub use mwal::run_mwal;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use crate::demo::{Demonstration, EmpiricalStats};
use crate::env::EnvironmentBundle;
use crate::error::{IrlError, Result};
use crate::estimators::{EstimatorConfig, EstimatorKind};
use crate::features::{ConstraintMode, FeatureMap, WeightVector};
use crate::mdp::{
    boltzmann_log_policy, BoltzmannConfig, QFunction, StochasticPolicy, TabularMdp, VI_DEFAULT_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Girl,
    Pm,
    Mwal,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Girl, Algorithm::Pm, Algorithm::Mwal];
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Girl => "GIRL",
            Algorithm::Pm => "PM",
            Algorithm::Mwal => "MWAL",
        })
    }
}

impl FromStr for Algorithm {
    type Err = IrlError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "GIRL" => Ok(Algorithm::Girl),
            "PM" => Ok(Algorithm::Pm),
            "MWAL" => Ok(Algorithm::Mwal),
            other => Err(IrlError::InvalidInput(format!("unknown algorithm `{other}`"))),
        }
    }
}

pub const DEFAULT_STEP_SIZE: f64 = 0.05;
pub const DEFAULT_ITERATIONS: usize = 100;
pub const GRID_TEMPERATURE: f64 = 0.1;
/// Sailing weights live on the L1 sphere, so `|Q| ≤ 1/(1−γ)` and action
/// gaps are small; a cold temperature keeps the Boltzmann policy informative.
pub const SAILING_TEMPERATURE: f64 = 0.005;
pub const SAILING_STEP_SIZE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct IrlConfig {
    pub algorithm: Algorithm,
    pub estimator: EstimatorConfig,
    /// Boltzmann temperature `η`.
    pub temperature: f64,
    pub step_size: f64,
    pub n_iterations: usize,
    pub constraint_mode: ConstraintMode,
    pub seed: u64,
    /// Halve the step and retry from the previous iterate whenever the
    /// objective decreases.
    pub backtracking: bool,
    /// Accuracy of the inner value iteration.
    pub vi_tol: f64,
}

impl IrlConfig {
    pub fn new(algorithm: Algorithm, estimator: EstimatorKind) -> Self {
        IrlConfig {
            algorithm,
            estimator: EstimatorConfig::new(estimator),
            temperature: GRID_TEMPERATURE,
            step_size: DEFAULT_STEP_SIZE,
            n_iterations: DEFAULT_ITERATIONS,
            constraint_mode: ConstraintMode::L1Sphere,
            seed: 0,
            backtracking: false,
            vi_tol: VI_DEFAULT_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iterations == 0 {
            return Err(IrlError::InvalidInput("at least one iteration is required".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(IrlError::InvalidInput(format!("bad step size {}", self.step_size)));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(IrlError::InvalidInput(format!("bad temperature {}", self.temperature)));
        }
        if !(self.vi_tol > 0.0) || !(self.estimator.fp_tol > 0.0) {
            return Err(IrlError::InvalidInput("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// The reward-free part of an environment.
#[derive(Debug, Clone, Copy)]
pub struct RewardlessMdp<'a> {
    pub mdp: &'a TabularMdp,
    pub features: &'a FeatureMap,
    /// Start from negative weights.
    pub costs_only: bool,
}

impl<'a> RewardlessMdp<'a> {
    pub fn new(mdp: &'a TabularMdp, features: &'a FeatureMap) -> Self {
        RewardlessMdp {
            mdp,
            features,
            costs_only: false,
        }
    }

    pub fn from_bundle(bundle: &'a EnvironmentBundle) -> Self {
        RewardlessMdp {
            mdp: &bundle.mdp,
            features: &bundle.features,
            costs_only: bundle.costs_only,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Weights evaluated at this iteration.
    pub theta: Vec<f64>,
    /// `log L_θ(D)`.
    pub loglik: f64,
    /// `J(π_θ, D)`.
    pub similarity: f64,
    /// The quantity the algorithm maximizes.
    pub objective: f64,
    /// Greedy action per state of this iterate's policy.
    pub greedy: Vec<usize>,
    /// Index of the best record so far; the iterate an early stop would return.
    pub incumbent: usize,
    pub wall: Duration,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn mean_wall(&self) -> Duration {
        if self.records.is_empty() {
            return Duration::ZERO;
        }
        self.records.iter().map(|r| r.wall).sum::<Duration>() / self.records.len() as u32
    }
}

#[derive(Debug, Clone)]
pub struct IrlResult {
    pub final_weights: WeightVector,
    /// The Boltzmann policy of the returned weights (for MWAL, the mixture).
    pub final_policy: StochasticPolicy,
    pub greedy_policy: StochasticPolicy,
    pub best_iteration: usize,
    pub trace: IterationTrace,
}

/// `J = Σ_{x,a} μ_E(x) π̂_E(a|x) log π_θ(a|x)`.
pub fn similarity_j(stats: &EmpiricalStats, boltzmann: &StochasticPolicy) -> Result<f64> {
    if stats.visitation.len() != boltzmann.n_states()
        || stats.policy.n_actions() != boltzmann.n_actions()
    {
        return Err(IrlError::DimensionMismatch("statistics and policy differ in shape".into()));
    }
    let mut j = 0.0;
    for (x, &mu) in stats.visitation.iter().enumerate() {
        if mu == 0.0 {
            continue;
        }
        for (a, &w) in stats.policy.row(x).iter().enumerate() {
            if w > 0.0 {
                j += mu * w * boltzmann.get(x, a).ln();
            }
        }
    }
    Ok(j)
}

/// [`similarity_j`] evaluated from `Q` in log space, exact even where the
/// Boltzmann probabilities underflow.
pub fn similarity_j_from_q(stats: &EmpiricalStats, q: &QFunction, cfg: &BoltzmannConfig) -> Result<f64> {
    if stats.visitation.len() != q.n_states() || stats.policy.n_actions() != q.n_actions() {
        return Err(IrlError::DimensionMismatch("statistics and Q-function differ in shape".into()));
    }
    let log_pi = boltzmann_log_policy(q, cfg);
    let m = q.n_actions();
    let mut j = 0.0;
    for (x, &mu) in stats.visitation.iter().enumerate() {
        if mu == 0.0 {
            continue;
        }
        for (a, &w) in stats.policy.row(x).iter().enumerate() {
            if w > 0.0 {
                j += mu * w * log_pi[x * m + a];
            }
        }
    }
    Ok(j)
}

/// `log L_θ(D) = Σ_i log ℓ_θ(x_i, a_i)`.
pub fn log_likelihood(demo: &Demonstration, boltzmann: &StochasticPolicy) -> Result<f64> {
    demo.check_bounds(boltzmann.n_states(), boltzmann.n_actions())?;
    Ok(demo.pairs().iter().map(|&(x, a)| boltzmann.get(x, a).ln()).sum())
}

/// Runs `cfg.algorithm`.
pub fn run_irl(
    problem: RewardlessMdp<'_>,
    stats: &EmpiricalStats,
    demo: &Demonstration,
    cfg: &IrlConfig,
) -> Result<IrlResult> {
    match cfg.algorithm {
        Algorithm::Girl => run_girl(problem, stats, cfg),
        Algorithm::Pm => run_pm(problem, stats, cfg),
        Algorithm::Mwal => run_mwal(problem, stats, demo, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::empirical_policy;

    #[test]
    fn uniform_policy_similarity() {
        let demo = Demonstration::from_pairs(vec![(0, 1), (1, 4), (1, 2)]);
        let stats = empirical_policy(&demo, 3, 5).unwrap();
        let pi = StochasticPolicy::uniform(3, 5);
        let j = similarity_j(&stats, &pi).unwrap();
        assert!((j + 5f64.ln()).abs() < 1e-15);
        assert!((-1.6094 - j).abs() < 1e-4);
        let ll = log_likelihood(&demo, &pi).unwrap();
        assert!((ll - 3.0 * j).abs() < 1e-10);
    }

    #[test]
    fn loglik_additive() {
        let q = crate::mdp::QFunction::new(2, 2, vec![0.3, -0.1, 1.0, 2.0]).unwrap();
        let pi = crate::mdp::boltzmann_policy(&q, &crate::mdp::BoltzmannConfig::new(0.5).unwrap());
        let one = log_likelihood(&Demonstration::from_pairs(vec![(1, 0)]), &pi).unwrap();
        let many = log_likelihood(&Demonstration::from_pairs(vec![(1, 0); 7]), &pi).unwrap();
        assert!((many - 7.0 * one).abs() < 1e-12);
    }

    #[test]
    fn similarity_is_order_invariant() {
        let q = crate::mdp::QFunction::new(2, 3, vec![0.3, -0.1, 1.0, 2.0, 0.0, 0.5]).unwrap();
        let pi = crate::mdp::boltzmann_policy(&q, &crate::mdp::BoltzmannConfig::new(0.5).unwrap());
        let pairs = vec![(0, 0), (1, 2), (0, 1), (1, 1), (0, 0)];
        let mut rev = pairs.clone();
        rev.reverse();
        let a = similarity_j(&empirical_policy(&Demonstration::from_pairs(pairs), 2, 3).unwrap(), &pi).unwrap();
        let b = similarity_j(&empirical_policy(&Demonstration::from_pairs(rev), 2, 3).unwrap(), &pi).unwrap();
        assert_eq!(a, b);
        assert!(a <= 0.0);
    }

    #[test]
    fn log_space_similarity_matches_and_survives_underflow() {
        let q = crate::mdp::QFunction::new(2, 3, vec![0.3, -0.1, 1.0, 2.0, 0.0, 0.5]).unwrap();
        let cfg = crate::mdp::BoltzmannConfig::new(0.5).unwrap();
        let stats = empirical_policy(&Demonstration::from_pairs(vec![(0, 0), (1, 2), (1, 1)]), 2, 3).unwrap();
        let direct = similarity_j(&stats, &crate::mdp::boltzmann_policy(&q, &cfg)).unwrap();
        let logged = similarity_j_from_q(&stats, &q, &cfg).unwrap();
        assert!((direct - logged).abs() < 1e-14);
        let cold = crate::mdp::BoltzmannConfig::new(1e-4).unwrap();
        let j = similarity_j_from_q(&stats, &q, &cold).unwrap();
        assert!(j.is_finite() && j < -1e3);
    }

    #[test]
    fn names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.to_string().parse::<Algorithm>().unwrap(), a);
        }
        assert!("nope".parse::<Algorithm>().is_err());
    }
}
