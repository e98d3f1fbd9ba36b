//! Estimators of `∂Q*/∂θ` and the likelihood gradient assembled from them.
//!
//! For a linear reward the derivative of `Q*` along a fixed greedy policy is
//! the feature-expectation tensor `Φ^π`, the solution of
//! `ψ = φ + γ P Π ψ`. Three estimators are provided:
//!
//! * **FP**: fixed-point sweeps from zero until the update falls below a
//!   tolerance.
//! * **IA**: one LU factorization of `T = I − γ P_π` solved against every
//!   feature, holding the policy fixed.
//! * **FP1**: a single sweep seeded at `φ`.

use std::fmt;
use std::str::FromStr;

use crate::demo::EmpiricalStats;
use crate::error::{IrlError, Result};
use crate::features::FeatureMap;
use crate::linalg::LuSolver;
use crate::mdp::{policy_system_matrix, BoltzmannConfig, StochasticPolicy, TabularMdp};

pub const FP_DEFAULT_TOL: f64 = 1e-8;
pub const FP_DEFAULT_MAX_ITER: usize = 10_000;

/// `∂Q*(x,a)/∂θ_k`, laid out like [`FeatureMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct QDerivative {
    n_states: usize,
    n_actions: usize,
    n_features: usize,
    values: Vec<f64>,
}

impl QDerivative {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    #[inline]
    pub fn get(&self, x: usize, a: usize, k: usize) -> f64 {
        self.values[(x * self.n_actions + a) * self.n_features + k]
    }

    #[inline]
    pub fn pair(&self, x: usize, a: usize) -> &[f64] {
        let start = (x * self.n_actions + a) * self.n_features;
        &self.values[start..start + self.n_features]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// `Σ_k θ_k ψ(x,a,k)` per state-action pair.
    pub fn contract(&self, theta: &[f64]) -> Vec<f64> {
        self.values
            .chunks_exact(self.n_features)
            .map(|p| p.iter().zip(theta).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &QDerivative) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Wraps a `(state, action, feature)` tensor.
    pub fn from_parts(n_states: usize, n_actions: usize, n_features: usize, values: Vec<f64>) -> Result<Self> {
        let expect = n_states
            .checked_mul(n_actions)
            .and_then(|v| v.checked_mul(n_features));
        if expect != Some(values.len()) {
            return Err(IrlError::DimensionMismatch(format!(
                "{} values for a {n_states}x{n_actions}x{n_features} derivative",
                values.len()
            )));
        }
        Ok(QDerivative { n_states, n_actions, n_features, values })
    }

    fn from_features(features: &FeatureMap) -> Self {
        QDerivative {
            n_states: features.n_states(),
            n_actions: features.n_actions(),
            n_features: features.n_features(),
            values: features.as_slice().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Fp,
    Ia,
    Fp1,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [EstimatorKind::Fp, EstimatorKind::Ia, EstimatorKind::Fp1];
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Fp => "FP",
            EstimatorKind::Ia => "IA",
            EstimatorKind::Fp1 => "FP1",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = IrlError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FP" => Ok(EstimatorKind::Fp),
            "IA" | "I" => Ok(EstimatorKind::Ia),
            "FP1" => Ok(EstimatorKind::Fp1),
            other => Err(IrlError::InvalidInput(format!("unknown estimator `{other}`"))),
        }
    }
}

/// How FP1 reads "a single step".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fp1Mode {
    /// `ψ = φ + γ P Π φ`.
    #[default]
    OneSweep,
    /// `ψ = φ`.
    FeaturesOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub fp1_mode: Fp1Mode,
}

impl EstimatorConfig {
    pub fn new(kind: EstimatorKind) -> Self {
        EstimatorConfig {
            kind,
            fp_tol: FP_DEFAULT_TOL,
            fp_max_iter: FP_DEFAULT_MAX_ITER,
            fp1_mode: Fp1Mode::OneSweep,
        }
    }

    pub fn estimate(
        &self,
        mdp: &TabularMdp,
        features: &FeatureMap,
        policy: &StochasticPolicy,
    ) -> Result<QDerivative> {
        match self.kind {
            EstimatorKind::Fp => {
                fp_feature_expectations(mdp, features, policy, self.fp_tol, self.fp_max_iter)
            }
            EstimatorKind::Ia => ia_derivative(mdp, features, policy),
            EstimatorKind::Fp1 => match self.fp1_mode {
                Fp1Mode::OneSweep => fp1_derivative(mdp, features, policy),
                Fp1Mode::FeaturesOnly => {
                    check_inputs(mdp, features, policy)?;
                    Ok(QDerivative::from_features(features))
                }
            },
        }
    }
}

fn check_inputs(mdp: &TabularMdp, features: &FeatureMap, policy: &StochasticPolicy) -> Result<()> {
    features.check_mdp(mdp)?;
    mdp.check_table(policy.n_states(), policy.n_actions(), "policy")
}

/// `Σ_b π(b|y) ψ(y,b,·)` for every state.
fn policy_average(psi: &[f64], policy: &StochasticPolicy, n_features: usize, out: &mut [f64]) {
    let n_actions = policy.n_actions();
    out.iter_mut().for_each(|v| *v = 0.0);
    for y in 0..policy.n_states() {
        let acc = &mut out[y * n_features..(y + 1) * n_features];
        for (b, &p) in policy.row(y).iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let row = &psi[(y * n_actions + b) * n_features..][..n_features];
            for (o, v) in acc.iter_mut().zip(row) {
                *o += p * v;
            }
        }
    }
}

/// One application of `ψ ← φ + γ P Π ψ`; returns the sup-norm change.
fn sweep(
    mdp: &TabularMdp,
    features: &FeatureMap,
    policy: &StochasticPolicy,
    psi: &mut [f64],
    avg: &mut [f64],
) -> f64 {
    let k = features.n_features();
    let gamma = mdp.discount();
    policy_average(psi, policy, k, avg);
    let mut change = 0.0f64;
    let mut next = vec![0.0; k];
    for x in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let out = &mut psi[(x * mdp.n_actions() + a) * k..][..k];
            next.copy_from_slice(features.pair(x, a));
            for &(y, p) in mdp.successors(x, a) {
                let w = gamma * p;
                for (n, v) in next.iter_mut().zip(&avg[y * k..(y + 1) * k]) {
                    *n += w * v;
                }
            }
            for (o, n) in out.iter_mut().zip(next.iter()) {
                change = change.max((n - *o).abs());
                *o = *n;
            }
        }
    }
    change
}

/// Exactly `sweeps` applications of the fixed-point operator from `ψ = 0`.
pub fn fp_sweeps(
    mdp: &TabularMdp,
    features: &FeatureMap,
    policy: &StochasticPolicy,
    sweeps: usize,
) -> Result<QDerivative> {
    check_inputs(mdp, features, policy)?;
    let k = features.n_features();
    let mut psi = vec![0.0; features.as_slice().len()];
    let mut avg = vec![0.0; mdp.n_states() * k];
    for _ in 0..sweeps {
        sweep(mdp, features, policy, &mut psi, &mut avg);
    }
    Ok(QDerivative {
        n_states: mdp.n_states(),
        n_actions: mdp.n_actions(),
        n_features: k,
        values: psi,
    })
}

/// Feature expectations `Φ^π` by fixed-point iteration from zero, stopping
/// once a sweep changes no entry by more than `tol`.
pub fn fp_feature_expectations(
    mdp: &TabularMdp,
    features: &FeatureMap,
    policy: &StochasticPolicy,
    tol: f64,
    max_iter: usize,
) -> Result<QDerivative> {
    check_inputs(mdp, features, policy)?;
    if !(tol > 0.0) {
        return Err(IrlError::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let k = features.n_features();
    let mut psi = vec![0.0; features.as_slice().len()];
    let mut avg = vec![0.0; mdp.n_states() * k];
    let mut change = f64::INFINITY;
    for _ in 0..max_iter {
        change = sweep(mdp, features, policy, &mut psi, &mut avg);
        if change <= tol {
            return Ok(QDerivative {
                n_states: mdp.n_states(),
                n_actions: mdp.n_actions(),
                n_features: k,
                values: psi,
            });
        }
    }
    Err(IrlError::NonConvergence {
        what: "fixed-point feature expectations",
        iterations: max_iter,
        residual: change,
    })
}

/// `∂Q/∂θ_k = φ_k + γ P_a T⁻¹ Φ̄_k` with `T = I − γ P_π` and
/// `Φ̄_k(x) = Σ_b π(b|x) φ_k(x,b)`, holding `π` fixed.
pub fn ia_derivative(
    mdp: &TabularMdp,
    features: &FeatureMap,
    policy: &StochasticPolicy,
) -> Result<QDerivative> {
    check_inputs(mdp, features, policy)?;
    let (n, m, k) = (mdp.n_states(), mdp.n_actions(), features.n_features());
    let gamma = mdp.discount();
    if gamma == 0.0 {
        return Ok(QDerivative::from_features(features));
    }
    let solver = LuSolver::new(policy_system_matrix(mdp, policy))?;
    let mut avg = vec![0.0; n * k];
    policy_average(features.as_slice(), policy, k, &mut avg);

    // w[y * k + f] = (T⁻¹ Φ̄_f)(y)
    let mut w = vec![0.0; n * k];
    let mut rhs = vec![0.0; n];
    for f in 0..k {
        for (y, r) in rhs.iter_mut().enumerate() {
            *r = avg[y * k + f];
        }
        for (y, v) in solver.solve(&rhs)?.into_iter().enumerate() {
            w[y * k + f] = v;
        }
    }

    let mut values = features.as_slice().to_vec();
    for x in 0..n {
        for a in 0..m {
            let out = &mut values[(x * m + a) * k..][..k];
            for &(y, p) in mdp.successors(x, a) {
                for (o, v) in out.iter_mut().zip(&w[y * k..(y + 1) * k]) {
                    *o += gamma * p * v;
                }
            }
        }
    }
    Ok(QDerivative {
        n_states: n,
        n_actions: m,
        n_features: k,
        values,
    })
}

/// One fixed-point step seeded at `φ`: `ψ = φ + γ P Π φ`.
pub fn fp1_derivative(
    mdp: &TabularMdp,
    features: &FeatureMap,
    policy: &StochasticPolicy,
) -> Result<QDerivative> {
    check_inputs(mdp, features, policy)?;
    let mut psi = features.as_slice().to_vec();
    let mut avg = vec![0.0; mdp.n_states() * features.n_features()];
    sweep(mdp, features, policy, &mut psi, &mut avg);
    Ok(QDerivative {
        n_states: mdp.n_states(),
        n_actions: mdp.n_actions(),
        n_features: features.n_features(),
        values: psi,
    })
}

/// `∂ℓ(x,a)/∂θ = (ℓ(x,a)/η)·(Φ(x,a) − Σ_b ℓ(x,b) Φ(x,b))`.
pub fn pair_likelihood_gradient(
    q_deriv: &QDerivative,
    boltzmann: &StochasticPolicy,
    cfg: &BoltzmannConfig,
    x: usize,
    a: usize,
) -> Vec<f64> {
    let scale = boltzmann.get(x, a) / cfg.temperature();
    centered_derivative(q_deriv, boltzmann, x, a)
        .into_iter()
        .map(|d| scale * d)
        .collect()
}

/// `Φ(x,a) − Σ_b ℓ(x,b) Φ(x,b)`.
pub(crate) fn centered_derivative(
    q_deriv: &QDerivative,
    boltzmann: &StochasticPolicy,
    x: usize,
    a: usize,
) -> Vec<f64> {
    let k = q_deriv.n_features();
    let mut mean = vec![0.0; k];
    for (b, &p) in boltzmann.row(x).iter().enumerate() {
        for (m, v) in mean.iter_mut().zip(q_deriv.pair(x, b)) {
            *m += p * v;
        }
    }
    q_deriv
        .pair(x, a)
        .iter()
        .zip(&mean)
        .map(|(v, m)| v - m)
        .collect()
}

/// `Δ_k = Σ_{x,a} μ_E(x) π̂_E(a|x) (1/ℓ(x,a)) ∂ℓ(x,a)/∂θ_k`, the gradient of
/// the similarity `J` (the log-likelihood divided by `M`).
pub fn loglik_gradient(
    stats: &EmpiricalStats,
    boltzmann: &StochasticPolicy,
    q_deriv: &QDerivative,
    cfg: &BoltzmannConfig,
) -> Result<Vec<f64>> {
    let n = q_deriv.n_states();
    let m = q_deriv.n_actions();
    if stats.visitation.len() != n
        || stats.policy.n_actions() != m
        || boltzmann.n_states() != n
        || boltzmann.n_actions() != m
    {
        return Err(IrlError::DimensionMismatch(
            "statistics, policy and derivative disagree on dimensions".into(),
        ));
    }
    let inv_t = cfg.confidence();
    let mut delta = vec![0.0; q_deriv.n_features()];
    for x in 0..n {
        let mu = stats.visitation[x];
        if mu == 0.0 {
            continue;
        }
        for a in 0..m {
            let w = stats.policy.get(x, a);
            if w == 0.0 {
                continue;
            }
            if boltzmann.get(x, a) <= 0.0 {
                return Err(IrlError::ZeroLikelihood { state: x, action: a });
            }
            // (1/ℓ)·∂ℓ is taken in closed form so tiny ℓ never divides
            let c = centered_derivative(q_deriv, boltzmann, x, a);
            for (d, v) in delta.iter_mut().zip(c) {
                *d += mu * w * inv_t * v;
            }
        }
    }
    Ok(delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::{empirical_policy, Demonstration};
    use crate::features::assemble_reward_raw;
    use crate::mdp::{policy_evaluation, q_from_v, QFunction};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(seed: u64, n: usize, m: usize, k: usize, gamma: f64) -> (TabularMdp, FeatureMap) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for _ in 0..n * m {
            let row: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let s: f64 = row.iter().sum();
            t.extend(row.iter().map(|v| v / s));
        }
        let mdp = TabularMdp::new(n, m, t, gamma, vec![1.0 / n as f64; n]).unwrap();
        let phi = (0..n * m * k).map(|_| rng.random::<f64>()).collect();
        (mdp, FeatureMap::new(n, m, k, phi).unwrap())
    }

    fn random_policy(seed: u64, n: usize, m: usize) -> StochasticPolicy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = Vec::new();
        for _ in 0..n {
            let row: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 0.1).collect();
            let s: f64 = row.iter().sum();
            v.extend(row.iter().map(|x| x / s));
        }
        StochasticPolicy::new(n, m, v).unwrap()
    }

    #[test]
    fn discount_zero_is_features() {
        let (mdp, f) = random_instance(1, 4, 3, 2, 0.5);
        let mdp = mdp.with_discount(0.0).unwrap();
        let pi = random_policy(2, 4, 3);
        let fp = fp_feature_expectations(&mdp, &f, &pi, 1e-12, 10).unwrap();
        assert_eq!(fp.as_slice(), f.as_slice());
        assert_eq!(ia_derivative(&mdp, &f, &pi).unwrap().as_slice(), f.as_slice());
        assert_eq!(fp1_derivative(&mdp, &f, &pi).unwrap().as_slice(), f.as_slice());
    }

    #[test]
    fn single_state_geometric() {
        let mdp = TabularMdp::new(1, 1, vec![1.0], 0.9, vec![1.0]).unwrap();
        let f = FeatureMap::new(1, 1, 1, vec![1.0]).unwrap();
        let pi = StochasticPolicy::uniform(1, 1);
        let ia = ia_derivative(&mdp, &f, &pi).unwrap();
        assert!((ia.get(0, 0, 0) - 10.0).abs() < 1e-12);
        let fp1 = fp1_derivative(&mdp, &f, &pi).unwrap();
        assert!((fp1.get(0, 0, 0) - 1.9).abs() < 1e-15);
    }

    #[test]
    fn fp_on_reward_feature_is_q_pi() {
        let (mdp, f) = random_instance(3, 5, 3, 1, 0.9);
        let pi = random_policy(4, 5, 3);
        let r = assemble_reward_raw(&f, &[1.0]).unwrap();
        let q = q_from_v(&mdp, &r, &policy_evaluation(&mdp, &r, &pi).unwrap()).unwrap();
        let psi = fp_feature_expectations(&mdp, &f, &pi, 1e-9, 10_000).unwrap();
        for (a, b) in psi.contract(&[1.0]).iter().zip(q.as_slice()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn fp_and_ia_agree_for_fixed_policy() {
        for seed in 0..5 {
            let (mdp, f) = random_instance(seed, 5, 3, 4, 0.9);
            let pi = random_policy(seed + 100, 5, 3);
            let fp = fp_feature_expectations(&mdp, &f, &pi, 1e-8, 10_000).unwrap();
            let ia = ia_derivative(&mdp, &f, &pi).unwrap();
            assert!(fp.max_abs_diff(&ia) < 1e-6);
        }
    }

    #[test]
    fn fp1_is_two_sweeps() {
        let (mdp, f) = random_instance(8, 4, 2, 3, 0.8);
        let pi = random_policy(9, 4, 2);
        let fp1 = fp1_derivative(&mdp, &f, &pi).unwrap();
        let two = fp_sweeps(&mdp, &f, &pi, 2).unwrap();
        assert_eq!(fp1, two);
        let uniform = FeatureMap::new(4, 2, 1, vec![1.0; 8]).unwrap();
        let c = fp1_derivative(&mdp, &uniform, &pi).unwrap();
        assert!(c.as_slice().iter().all(|&v| (v - 1.8).abs() < 1e-15));
    }

    #[test]
    fn fp_non_convergence() {
        let (mdp, f) = random_instance(1, 3, 2, 1, 0.99);
        let pi = random_policy(1, 3, 2);
        assert!(matches!(
            fp_feature_expectations(&mdp, &f, &pi, 1e-12, 5),
            Err(IrlError::NonConvergence { .. })
        ));
    }

    #[test]
    fn pair_gradient_degenerate_cases() {
        let (mdp, f) = random_instance(2, 3, 1, 2, 0.9);
        let pi = StochasticPolicy::uniform(3, 1);
        let d = fp_feature_expectations(&mdp, &f, &pi, 1e-10, 10_000).unwrap();
        let cfg = BoltzmannConfig::new(0.5).unwrap();
        assert!(pair_likelihood_gradient(&d, &pi, &cfg, 1, 0).iter().all(|&g| g == 0.0));

        // identical rows across actions
        let f = FeatureMap::new(1, 3, 2, vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0]).unwrap();
        let d = QDerivative::from_features(&f);
        let q = QFunction::new(1, 3, vec![0.1, 0.5, -0.2]).unwrap();
        let b = crate::mdp::boltzmann_policy(&q, &cfg);
        for a in 0..3 {
            assert!(pair_likelihood_gradient(&d, &b, &cfg, 0, a).iter().all(|g| g.abs() < 1e-15));
        }
    }

    #[test]
    fn gradient_restricted_to_visited_state() {
        let (mdp, f) = random_instance(5, 4, 3, 2, 0.9);
        let pi = random_policy(6, 4, 3);
        let d = fp_feature_expectations(&mdp, &f, &pi, 1e-10, 10_000).unwrap();
        let cfg = BoltzmannConfig::new(0.7).unwrap();
        let demo = Demonstration::from_pairs(vec![(2, 0), (2, 1), (2, 1)]);
        let stats = empirical_policy(&demo, 4, 3).unwrap();
        let delta = loglik_gradient(&stats, &pi, &d, &cfg).unwrap();
        let mut expect = [0.0; 2];
        for a in 0..3 {
            let g = pair_likelihood_gradient(&d, &pi, &cfg, 2, a);
            for k in 0..2 {
                expect[k] += stats.policy.get(2, a) * g[k] / pi.get(2, a);
            }
        }
        for k in 0..2 {
            assert!((delta[k] - expect[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_likelihood_is_an_error() {
        let f = FeatureMap::new(1, 2, 1, vec![1.0, 0.0]).unwrap();
        let d = QDerivative::from_features(&f);
        let pi = StochasticPolicy::deterministic(2, &[0]).unwrap();
        let stats = empirical_policy(&Demonstration::from_pairs(vec![(0, 1)]), 1, 2).unwrap();
        let cfg = BoltzmannConfig::new(1.0).unwrap();
        assert!(matches!(
            loglik_gradient(&stats, &pi, &d, &cfg),
            Err(IrlError::ZeroLikelihood { state: 0, action: 1 })
        ));
    }
}
