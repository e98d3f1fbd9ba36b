//! Exact tabular MDPs: value iteration, Q extraction, greedy and Boltzmann
//! policies, and policy evaluation by direct linear solve.
//!
//! Every state-action table is stored row-major, `values[x * n_actions + a]`.
//! Transition probabilities are stored densely as
//! `transition[(x * n_actions + a) * n_states + y] = P(y | x, a)`, with a
//! compressed successor list kept alongside for the sweeps.

use nalgebra::DMatrix;

use crate::error::{IrlError, Result};
use crate::linalg::LuSolver;

/// Tolerance on probability-vector sums.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Default value-iteration accuracy (bound on `‖V − V*‖∞`).
pub const VI_DEFAULT_TOL: f64 = 1e-8;
pub const VI_DEFAULT_MAX_ITER: usize = 100_000;
/// Relative tolerance under which two Q-values count as tied.
pub const TIE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    discount: f64,
    initial_dist: Vec<f64>,
    succ_offsets: Vec<usize>,
    succ: Vec<(usize, f64)>,
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(IrlError::InvalidInput(format!(
            "{what} has negative or non-finite entries"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return Err(IrlError::InvalidInput(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        discount: f64,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(IrlError::InvalidInput(
                "an MDP needs at least one state and one action".into(),
            ));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(IrlError::DimensionMismatch(format!(
                "transition tensor has {} entries, expected {}",
                transition.len(),
                n_states * n_actions * n_states
            )));
        }
        if initial_dist.len() != n_states {
            return Err(IrlError::DimensionMismatch(format!(
                "initial distribution has {} entries, expected {n_states}",
                initial_dist.len()
            )));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(IrlError::InvalidInput(format!(
                "discount {discount} outside [0, 1)"
            )));
        }
        for (sa, row) in transition.chunks_exact(n_states).enumerate() {
            check_distribution(
                row,
                &format!(
                    "transition row (state {}, action {})",
                    sa / n_actions,
                    sa % n_actions
                ),
            )?;
        }
        check_distribution(&initial_dist, "initial distribution")?;

        let mut succ_offsets = Vec::with_capacity(n_states * n_actions + 1);
        let mut succ = Vec::new();
        succ_offsets.push(0);
        for row in transition.chunks_exact(n_states) {
            succ.extend(
                row.iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(y, p)| (y, *p)),
            );
            succ_offsets.push(succ.len());
        }

        Ok(TabularMdp {
            n_states,
            n_actions,
            transition,
            discount,
            initial_dist,
            succ_offsets,
            succ,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    /// The dense transition tensor.
    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    pub fn transition_prob(&self, x: usize, a: usize, y: usize) -> f64 {
        self.transition[(x * self.n_actions + a) * self.n_states + y]
    }

    /// `P(· | x, a)` as a dense row.
    pub fn transition_row(&self, x: usize, a: usize) -> &[f64] {
        let start = (x * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    /// Nonzero entries of `P(· | x, a)` in increasing state order.
    pub fn successors(&self, x: usize, a: usize) -> &[(usize, f64)] {
        let sa = x * self.n_actions + a;
        &self.succ[self.succ_offsets[sa]..self.succ_offsets[sa + 1]]
    }

    /// `Σ_y P(y | x, a) v(y)`.
    #[inline]
    pub fn expected_next(&self, x: usize, a: usize, v: &[f64]) -> f64 {
        self.successors(x, a).iter().map(|&(y, p)| p * v[y]).sum()
    }

    /// A copy of this MDP with a different discount factor.
    pub fn with_discount(&self, discount: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&discount) {
            return Err(IrlError::InvalidInput(format!(
                "discount {discount} outside [0, 1)"
            )));
        }
        Ok(TabularMdp {
            discount,
            ..self.clone()
        })
    }

    /// True when every action keeps the process in `x` with probability one.
    pub fn is_absorbing(&self, x: usize) -> bool {
        (0..self.n_actions).all(|a| self.transition_prob(x, a, x) == 1.0)
    }

    pub(crate) fn check_table(&self, n_states: usize, n_actions: usize, what: &str) -> Result<()> {
        if n_states != self.n_states || n_actions != self.n_actions {
            return Err(IrlError::DimensionMismatch(format!(
                "{what} is {n_states}x{n_actions}, MDP is {}x{}",
                self.n_states, self.n_actions
            )));
        }
        Ok(())
    }
}

macro_rules! state_action_table {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            n_states: usize,
            n_actions: usize,
            values: Vec<f64>,
        }

        impl $name {
            pub fn zeros(n_states: usize, n_actions: usize) -> Self {
                $name { n_states, n_actions, values: vec![0.0; n_states * n_actions] }
            }

            pub fn n_states(&self) -> usize {
                self.n_states
            }

            pub fn n_actions(&self) -> usize {
                self.n_actions
            }

            #[inline]
            pub fn get(&self, x: usize, a: usize) -> f64 {
                self.values[x * self.n_actions + a]
            }

            #[inline]
            pub fn row(&self, x: usize) -> &[f64] {
                &self.values[x * self.n_actions..(x + 1) * self.n_actions]
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.values
            }
        }
    };
}

state_action_table!(
    /// `R(x, a)`.
    RewardTable
);
state_action_table!(
    /// `Q(x, a)`.
    QFunction
);
state_action_table!(
    /// `π(a | x)`; each row is a probability vector.
    StochasticPolicy
);

fn check_shape(n_states: usize, n_actions: usize, len: usize, what: &str) -> Result<()> {
    if n_states == 0 || n_actions == 0 || len != n_states * n_actions {
        return Err(IrlError::DimensionMismatch(format!(
            "{what} has {len} entries, expected {n_states}x{n_actions}"
        )));
    }
    Ok(())
}

impl RewardTable {
    pub fn new(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        check_shape(n_states, n_actions, values.len(), "reward table")?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(IrlError::InvalidInput("reward table has non-finite entries".into()));
        }
        Ok(RewardTable { n_states, n_actions, values })
    }
}

impl QFunction {
    pub fn new(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        check_shape(n_states, n_actions, values.len(), "Q-function")?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(IrlError::InvalidInput("Q-function has non-finite entries".into()));
        }
        Ok(QFunction { n_states, n_actions, values })
    }

    /// Largest entry of row `x`.
    pub fn max_row(&self, x: usize) -> f64 {
        self.row(x).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Actions of row `x` within the tie tolerance of the row maximum.
    pub fn maximizers(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        let m = self.max_row(x);
        let tol = TIE_TOL * m.abs().max(1.0);
        self.row(x)
            .iter()
            .enumerate()
            .filter(move |(_, q)| **q >= m - tol)
            .map(|(a, _)| a)
    }
}

impl StochasticPolicy {
    pub fn new(n_states: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        check_shape(n_states, n_actions, values.len(), "policy")?;
        for (x, row) in values.chunks_exact(n_actions).enumerate() {
            check_distribution(row, &format!("policy row {x}"))?;
        }
        Ok(StochasticPolicy { n_states, n_actions, values })
    }

    /// Deterministic policy choosing `actions[x]` in state `x`.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        if let Some(&a) = actions.iter().find(|&&a| a >= n_actions) {
            return Err(IrlError::InvalidInput(format!(
                "action {a} out of range for {n_actions} actions"
            )));
        }
        let mut values = vec![0.0; actions.len() * n_actions];
        for (x, &a) in actions.iter().enumerate() {
            values[x * n_actions + a] = 1.0;
        }
        StochasticPolicy::new(actions.len(), n_actions, values)
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        StochasticPolicy {
            n_states,
            n_actions,
            values: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// Most probable action per state, lowest index first among ties.
    pub fn greedy_actions(&self) -> Vec<usize> {
        (0..self.n_states)
            .map(|x| {
                let row = self.row(x);
                let mut best = 0;
                for (a, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = a;
                    }
                }
                best
            })
            .collect()
    }

    pub fn is_deterministic(&self) -> bool {
        self.values.iter().all(|&p| p == 0.0 || p == 1.0)
    }

    /// Per-state average of several policies over the same spaces.
    pub fn mixture(policies: &[StochasticPolicy]) -> Result<Self> {
        let first = policies
            .first()
            .ok_or_else(|| IrlError::InvalidInput("empty policy mixture".into()))?;
        let mut values = vec![0.0; first.values.len()];
        for p in policies {
            if p.n_states != first.n_states || p.n_actions != first.n_actions {
                return Err(IrlError::DimensionMismatch("mixture of unequal policies".into()));
            }
            for (acc, v) in values.iter_mut().zip(&p.values) {
                *acc += v;
            }
        }
        let w = 1.0 / policies.len() as f64;
        values.iter_mut().for_each(|v| *v *= w);
        for row in values.chunks_exact_mut(first.n_actions) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        StochasticPolicy::new(first.n_states, first.n_actions, values)
    }
}

/// `V(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction(pub Vec<f64>);

impl ValueFunction {
    pub fn zeros(n_states: usize) -> Self {
        ValueFunction(vec![0.0; n_states])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Boltzmann temperature `η`; the pair-likelihood confidence is `1/η`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoltzmannConfig {
    temperature: f64,
}

impl BoltzmannConfig {
    pub fn new(temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(IrlError::InvalidInput(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        Ok(BoltzmannConfig { temperature })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn confidence(&self) -> f64 {
        1.0 / self.temperature
    }
}

/// Bellman-optimality value iteration started from zero.
///
/// Stops when the sup-norm change between sweeps drops to
/// `tol·(1−γ)/γ`, which bounds the distance to `V*` by `tol`.
pub fn value_iteration(
    mdp: &TabularMdp,
    reward: &RewardTable,
    tol: f64,
    max_iter: usize,
) -> Result<ValueFunction> {
    value_iteration_from(mdp, reward, &ValueFunction::zeros(mdp.n_states()), tol, max_iter)
}

/// Value iteration warm-started from `init`.
pub fn value_iteration_from(
    mdp: &TabularMdp,
    reward: &RewardTable,
    init: &ValueFunction,
    tol: f64,
    max_iter: usize,
) -> Result<ValueFunction> {
    mdp.check_table(reward.n_states(), reward.n_actions(), "reward")?;
    if init.0.len() != mdp.n_states() {
        return Err(IrlError::DimensionMismatch("initial value function".into()));
    }
    if !(tol > 0.0) {
        return Err(IrlError::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let gamma = mdp.discount();
    let threshold = if gamma == 0.0 {
        f64::INFINITY
    } else {
        tol * (1.0 - gamma) / gamma
    };

    let mut v = init.0.clone();
    let mut next = vec![0.0; v.len()];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        residual = 0.0;
        for (x, out) in next.iter_mut().enumerate() {
            let mut best = f64::NEG_INFINITY;
            for a in 0..mdp.n_actions() {
                let q = reward.get(x, a) + gamma * mdp.expected_next(x, a, &v);
                if q > best {
                    best = q;
                }
            }
            residual = f64::max(residual, (best - v[x]).abs());
            *out = best;
        }
        std::mem::swap(&mut v, &mut next);
        if residual <= threshold {
            return Ok(ValueFunction(v));
        }
    }
    Err(IrlError::NonConvergence {
        what: "value iteration",
        iterations: max_iter,
        residual,
    })
}

/// `Q(x,a) = R(x,a) + γ Σ_y P(y|x,a) v(y)`.
pub fn q_from_v(mdp: &TabularMdp, reward: &RewardTable, v: &ValueFunction) -> Result<QFunction> {
    mdp.check_table(reward.n_states(), reward.n_actions(), "reward")?;
    if v.0.len() != mdp.n_states() {
        return Err(IrlError::DimensionMismatch(format!(
            "value function has {} entries, MDP has {} states",
            v.0.len(),
            mdp.n_states()
        )));
    }
    let gamma = mdp.discount();
    let n_actions = mdp.n_actions();
    let values = (0..mdp.n_states() * n_actions)
        .map(|sa| {
            let (x, a) = (sa / n_actions, sa % n_actions);
            reward.get(x, a) + gamma * mdp.expected_next(x, a, &v.0)
        })
        .collect();
    QFunction::new(mdp.n_states(), n_actions, values)
}

/// Deterministic argmax policy; ties go to the lowest action index.
pub fn greedy_policy(q: &QFunction) -> StochasticPolicy {
    let actions: Vec<usize> = (0..q.n_states())
        .map(|x| q.maximizers(x).next().unwrap_or(0))
        .collect();
    let mut values = vec![0.0; q.n_states() * q.n_actions()];
    for (x, a) in actions.into_iter().enumerate() {
        values[x * q.n_actions() + a] = 1.0;
    }
    StochasticPolicy {
        n_states: q.n_states(),
        n_actions: q.n_actions(),
        values,
    }
}

/// Softmax of `Q/η` per state, shifted by the row maximum. Entries that
/// would underflow are floored at the smallest normal `f64`, keeping every
/// row strictly positive.
pub fn boltzmann_policy(q: &QFunction, cfg: &BoltzmannConfig) -> StochasticPolicy {
    let inv_t = cfg.confidence();
    let mut values = Vec::with_capacity(q.as_slice().len());
    for x in 0..q.n_states() {
        let row = q.row(x);
        let m = q.max_row(x);
        let start = values.len();
        values.extend(row.iter().map(|v| ((v - m) * inv_t).exp()));
        let z: f64 = values[start..].iter().sum();
        values[start..]
            .iter_mut()
            .for_each(|v| *v = (*v / z).max(f64::MIN_POSITIVE));
    }
    StochasticPolicy {
        n_states: q.n_states(),
        n_actions: q.n_actions(),
        values,
    }
}

/// `log π(a|x)` of the Boltzmann policy, computed without underflow.
pub fn boltzmann_log_policy(q: &QFunction, cfg: &BoltzmannConfig) -> Vec<f64> {
    let inv_t = cfg.confidence();
    let mut out = Vec::with_capacity(q.as_slice().len());
    for x in 0..q.n_states() {
        let m = q.max_row(x);
        let lse = q.row(x).iter().map(|v| ((v - m) * inv_t).exp()).sum::<f64>().ln();
        out.extend(q.row(x).iter().map(|v| (v - m) * inv_t - lse));
    }
    out
}

/// `I − γ P_π` as a dense matrix.
pub(crate) fn policy_system_matrix(mdp: &TabularMdp, policy: &StochasticPolicy) -> DMatrix<f64> {
    let n = mdp.n_states();
    let gamma = mdp.discount();
    let mut t = DMatrix::<f64>::identity(n, n);
    for x in 0..n {
        for (a, &pa) in policy.row(x).iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for &(y, p) in mdp.successors(x, a) {
                t[(x, y)] -= gamma * pa * p;
            }
        }
    }
    t
}

/// Exact `V^π` from `(I − γP_π) V = R_π`.
pub fn policy_evaluation(
    mdp: &TabularMdp,
    reward: &RewardTable,
    policy: &StochasticPolicy,
) -> Result<ValueFunction> {
    mdp.check_table(reward.n_states(), reward.n_actions(), "reward")?;
    mdp.check_table(policy.n_states(), policy.n_actions(), "policy")?;
    let r_pi: Vec<f64> = (0..mdp.n_states())
        .map(|x| {
            policy
                .row(x)
                .iter()
                .zip(reward.row(x))
                .map(|(p, r)| p * r)
                .sum()
        })
        .collect();
    let solver = LuSolver::new(policy_system_matrix(mdp, policy))?;
    Ok(ValueFunction(solver.solve(&r_pi)?))
}

/// `Σ_x V(x) P(x₀ = x)`.
pub fn total_value(mdp: &TabularMdp, v: &ValueFunction) -> f64 {
    mdp.initial_dist().iter().zip(&v.0).map(|(p, v)| p * v).sum()
}

/// Optimal value, Q-function and tie-broken greedy policy.
#[derive(Debug, Clone)]
pub struct OptimalSolution {
    pub value: ValueFunction,
    pub q: QFunction,
    pub policy: StochasticPolicy,
}

/// Value iteration followed by policy-iteration polishing, so the returned
/// values are those of an exactly optimal deterministic policy.
pub fn solve_optimal(mdp: &TabularMdp, reward: &RewardTable) -> Result<OptimalSolution> {
    let v0 = value_iteration(mdp, reward, VI_DEFAULT_TOL, VI_DEFAULT_MAX_ITER)?;
    let mut actions = greedy_policy(&q_from_v(mdp, reward, &v0)?).greedy_actions();
    for _ in 0..mdp.n_states().max(1) * mdp.n_actions() + 1 {
        let policy = StochasticPolicy::deterministic(mdp.n_actions(), &actions)?;
        let value = policy_evaluation(mdp, reward, &policy)?;
        let q = q_from_v(mdp, reward, &value)?;
        // keep the incumbent action unless another is strictly better
        let mut changed = false;
        for (x, cur) in actions.iter_mut().enumerate() {
            let tol = TIE_TOL * q.max_row(x).abs().max(1.0);
            if q.get(x, *cur) < q.max_row(x) - tol {
                *cur = q.maximizers(x).next().unwrap_or(0);
                changed = true;
            }
        }
        if !changed {
            let policy = greedy_policy(&q);
            return Ok(OptimalSolution { value, q, policy });
        }
    }
    Err(IrlError::NonConvergence {
        what: "policy iteration",
        iterations: mdp.n_states() * mdp.n_actions() + 1,
        residual: f64::NAN,
    })
}
