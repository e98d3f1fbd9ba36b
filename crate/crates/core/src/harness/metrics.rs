//! Total value and greedy-policy agreement.

use crate::env::EnvironmentBundle;
use crate::error::{IrlError, Result};
use crate::features::assemble_reward;
use crate::mdp::{
    policy_evaluation, solve_optimal, total_value, OptimalSolution, QFunction, RewardTable,
    StochasticPolicy,
};

/// Fraction of states where both policies' greedy actions coincide.
pub fn policy_agreement(expert: &StochasticPolicy, learned: &StochasticPolicy) -> Result<f64> {
    check_shapes(expert.n_states(), expert.n_actions(), learned)?;
    let e = expert.greedy_actions();
    let l = learned.greedy_actions();
    let hits = e.iter().zip(&l).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / e.len().max(1) as f64)
}

/// Like [`policy_agreement`], but a learned action that attains a tied
/// maximum of the expert's Q-function also counts as a match.
pub fn policy_agreement_with_ties(expert_q: &QFunction, learned: &StochasticPolicy) -> Result<f64> {
    check_shapes(expert_q.n_states(), expert_q.n_actions(), learned)?;
    let l = learned.greedy_actions();
    let hits = l
        .iter()
        .enumerate()
        .filter(|&(x, &a)| expert_q.maximizers(x).any(|b| b == a))
        .count();
    Ok(hits as f64 / l.len().max(1) as f64)
}

fn check_shapes(n_states: usize, n_actions: usize, learned: &StochasticPolicy) -> Result<()> {
    if learned.n_states() != n_states || learned.n_actions() != n_actions {
        return Err(IrlError::DimensionMismatch(format!(
            "expert is {n_states}x{n_actions}, learned policy is {}x{}",
            learned.n_states(),
            learned.n_actions()
        )));
    }
    Ok(())
}

/// The optimal behaviour under an environment's true reward.
#[derive(Debug, Clone)]
pub struct ExpertReference {
    pub reward: RewardTable,
    pub solution: OptimalSolution,
    /// `V_{R_E}^{π_E}`.
    pub value: f64,
}

impl ExpertReference {
    pub fn solve(bundle: &EnvironmentBundle) -> Result<Self> {
        let reward = assemble_reward(&bundle.features, &bundle.true_weights)?;
        let solution = solve_optimal(&bundle.mdp, &reward)?;
        let value = total_value(&bundle.mdp, &solution.value);
        Ok(ExpertReference { reward, solution, value })
    }

    /// `(V_{R_E}^{π}, agreement)` for a learned greedy policy.
    pub fn evaluate(&self, bundle: &EnvironmentBundle, learned: &StochasticPolicy) -> Result<(f64, f64)> {
        let v = policy_evaluation(&bundle.mdp, &self.reward, learned)?;
        let agreement = policy_agreement_with_ties(&self.solution.q, learned)?;
        Ok((total_value(&bundle.mdp, &v), agreement))
    }
}

/// Solves the expert and scores `learned` against it.
pub fn evaluate_learned(bundle: &EnvironmentBundle, learned: &StochasticPolicy) -> Result<(f64, f64)> {
    ExpertReference::solve(bundle)?.evaluate(bundle, learned)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::build_named;

    #[test]
    fn agreement_extremes() {
        let a = StochasticPolicy::deterministic(3, &[0, 1, 2, 0]).unwrap();
        let b = StochasticPolicy::deterministic(3, &[1, 2, 0, 1]).unwrap();
        assert_eq!(policy_agreement(&a, &a).unwrap(), 1.0);
        assert_eq!(policy_agreement(&a, &b).unwrap(), 0.0);
        let c = StochasticPolicy::deterministic(2, &[0, 1, 0, 0]).unwrap();
        assert!(policy_agreement(&a, &c).is_err());
    }

    #[test]
    fn ties_count_as_matches() {
        let q = QFunction::new(2, 2, vec![1.0, 1.0, 0.0, 2.0]).unwrap();
        let p = StochasticPolicy::deterministic(2, &[1, 1]).unwrap();
        assert_eq!(policy_agreement_with_ties(&q, &p).unwrap(), 1.0);
        let p = StochasticPolicy::deterministic(2, &[1, 0]).unwrap();
        assert_eq!(policy_agreement_with_ties(&q, &p).unwrap(), 0.5);
    }

    #[test]
    fn expert_scores_itself() {
        let b = build_named("narrow-passage-2x2").unwrap();
        let e = ExpertReference::solve(&b).unwrap();
        let (v, agree) = e.evaluate(&b, &e.solution.policy).unwrap();
        assert!((v - e.value).abs() < 1e-12);
        assert_eq!(agree, 1.0);
        let stay = StochasticPolicy::deterministic(5, &vec![crate::env::STAY; b.mdp.n_states()]).unwrap();
        let (v_stay, _) = evaluate_learned(&b, &stay).unwrap();
        assert!(v_stay < e.value);
    }
}
