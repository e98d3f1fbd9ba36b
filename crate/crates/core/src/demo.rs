//! Expert demonstrations and the empirical statistics `μ_E`, `π̂_E`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::EnvironmentBundle;
use crate::error::{IrlError, Result};
use crate::features::FeatureMap;
use crate::mdp::StochasticPolicy;

/// Observed `(state, action)` pairs, grouped into consecutive trajectories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Demonstration {
    pairs: Vec<(usize, usize)>,
    lengths: Vec<usize>,
}

impl Demonstration {
    /// `lengths` splits `pairs` into trajectories and must sum to its length.
    pub fn new(pairs: Vec<(usize, usize)>, lengths: Vec<usize>) -> Result<Self> {
        if lengths.iter().sum::<usize>() != pairs.len() {
            return Err(IrlError::InvalidInput(format!(
                "trajectory lengths sum to {}, but there are {} pairs",
                lengths.iter().sum::<usize>(),
                pairs.len()
            )));
        }
        Ok(Demonstration { pairs, lengths })
    }

    /// All pairs treated as one trajectory.
    pub fn from_pairs(pairs: Vec<(usize, usize)>) -> Self {
        let lengths = if pairs.is_empty() { vec![] } else { vec![pairs.len()] };
        Demonstration { pairs, lengths }
    }

    /// Number of pairs `M`.
    pub fn m(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn trajectories(&self) -> impl Iterator<Item = &[(usize, usize)]> + '_ {
        let mut start = 0;
        self.lengths.iter().map(move |&l| {
            let t = &self.pairs[start..start + l];
            start += l;
            t
        })
    }

    pub fn check_bounds(&self, n_states: usize, n_actions: usize) -> Result<()> {
        match self.pairs.iter().find(|(x, a)| *x >= n_states || *a >= n_actions) {
            Some((x, a)) => Err(IrlError::InvalidInput(format!(
                "pair ({x}, {a}) out of range for {n_states} states and {n_actions} actions"
            ))),
            None => Ok(()),
        }
    }
}

/// How demonstrations are generated from the expert's optimal Q-function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExpertMode {
    Greedy,
    Boltzmann { temperature: f64 },
}

/// Smallest `H` with `γ^H < 10⁻³`.
pub fn default_horizon(discount: f64) -> usize {
    let mut h = 1;
    let mut g = discount;
    while g >= 1e-3 {
        g *= discount;
        h += 1;
    }
    h
}

fn sample_index(rng: &mut ChaCha8Rng, probs: impl Iterator<Item = (usize, f64)>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Rolls out `policy` from the initial distribution.
///
/// Each trajectory records at most `horizon` pairs and stops on entering one
/// of the bundle's absorbing states. The generator is ChaCha8 seeded from
/// `seed`, so output is identical across platforms.
pub fn sample_trajectories(
    bundle: &EnvironmentBundle,
    policy: &StochasticPolicy,
    n_traj: usize,
    horizon: usize,
    seed: u64,
) -> Result<Demonstration> {
    let mdp = &bundle.mdp;
    mdp.check_table(policy.n_states(), policy.n_actions(), "policy")?;
    if horizon == 0 {
        return Err(IrlError::InvalidInput("horizon must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n_traj * horizon.min(1024));
    let mut lengths = Vec::with_capacity(n_traj);
    let mut absorbing = vec![false; mdp.n_states()];
    for &x in &bundle.absorbing {
        absorbing[x] = true;
    }
    for _ in 0..n_traj {
        let start_len = pairs.len();
        let mut x = sample_index(&mut rng, mdp.initial_dist().iter().copied().enumerate());
        for _ in 0..horizon {
            if absorbing[x] {
                break;
            }
            let a = sample_index(&mut rng, policy.row(x).iter().copied().enumerate());
            pairs.push((x, a));
            x = sample_index(&mut rng, mdp.successors(x, a).iter().copied());
        }
        lengths.push(pairs.len() - start_len);
    }
    Demonstration::new(pairs, lengths)
}

/// `μ_E(x) = #{i : x_i = x} / M`.
pub fn empirical_visitation(demo: &Demonstration, n_states: usize) -> Result<Vec<f64>> {
    if demo.m() == 0 {
        return Err(IrlError::InvalidInput("empty demonstration".into()));
    }
    demo.check_bounds(n_states, usize::MAX)?;
    let mut counts = vec![0usize; n_states];
    for &(x, _) in demo.pairs() {
        counts[x] += 1;
    }
    let m = demo.m() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / m).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalStats {
    /// `μ_E`.
    pub visitation: Vec<f64>,
    /// `π̂_E`; uniform on unvisited states.
    pub policy: StochasticPolicy,
    pub visited: Vec<bool>,
    pub state_counts: Vec<usize>,
    /// `M`.
    pub n_pairs: usize,
}

/// Count-ratio estimate of the expert policy, with the uniform random walk
/// on states the demonstration never reaches.
pub fn empirical_policy(
    demo: &Demonstration,
    n_states: usize,
    n_actions: usize,
) -> Result<EmpiricalStats> {
    if demo.m() == 0 {
        return Err(IrlError::InvalidInput("empty demonstration".into()));
    }
    demo.check_bounds(n_states, n_actions)?;
    let mut pair_counts = vec![0usize; n_states * n_actions];
    let mut state_counts = vec![0usize; n_states];
    for &(x, a) in demo.pairs() {
        pair_counts[x * n_actions + a] += 1;
        state_counts[x] += 1;
    }
    let mut probs = vec![1.0 / n_actions as f64; n_states * n_actions];
    for x in 0..n_states {
        if state_counts[x] > 0 {
            let c = state_counts[x] as f64;
            for a in 0..n_actions {
                probs[x * n_actions + a] = pair_counts[x * n_actions + a] as f64 / c;
            }
        }
    }
    Ok(EmpiricalStats {
        visitation: empirical_visitation(demo, n_states)?,
        policy: StochasticPolicy::new(n_states, n_actions, probs)?,
        visited: state_counts.iter().map(|&c| c > 0).collect(),
        state_counts,
        n_pairs: demo.m(),
    })
}

/// Average over trajectories of `Σ_t γ^t φ(x_t, a_t)`.
pub fn empirical_feature_expectations(
    demo: &Demonstration,
    features: &FeatureMap,
    discount: f64,
) -> Result<Vec<f64>> {
    demo.check_bounds(features.n_states(), features.n_actions())?;
    let n_traj = demo.lengths().len();
    if n_traj == 0 {
        return Err(IrlError::InvalidInput("empty demonstration".into()));
    }
    let mut mu = vec![0.0; features.n_features()];
    for traj in demo.trajectories() {
        let mut g = 1.0;
        for &(x, a) in traj {
            for (m, f) in mu.iter_mut().zip(features.pair(x, a)) {
                *m += g * f;
            }
            g *= discount;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n_traj as f64);
    Ok(mu)
}

/// Serializes as `M <m>`, `L <lengths...>`, then one `state action` per line.
pub fn write_demonstration(demo: &Demonstration) -> String {
    let mut s = String::with_capacity(16 + demo.m() * 8);
    let _ = writeln!(s, "M {}", demo.m());
    s.push('L');
    for l in demo.lengths() {
        let _ = write!(s, " {l}");
    }
    s.push('\n');
    for (x, a) in demo.pairs() {
        let _ = writeln!(s, "{x} {a}");
    }
    s
}

/// Parses [`write_demonstration`] output. The `L` line is optional; without
/// it all pairs form one trajectory. Blank lines and `#` comments are
/// skipped.
pub fn parse_demonstration(text: &str) -> Result<Demonstration> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (ln, header) = lines
        .next()
        .ok_or_else(|| IrlError::parse(1, "missing `M` header"))?;
    let m: usize = header
        .strip_prefix('M')
        .and_then(|r| r.trim().parse().ok())
        .ok_or_else(|| IrlError::parse(ln, "expected `M <count>`"))?;

    let mut pairs = Vec::with_capacity(m.min(1 << 20));
    let mut lengths = None;
    for (ln, l) in lines {
        if let Some(rest) = l.strip_prefix('L') {
            if lengths.is_some() || !pairs.is_empty() {
                return Err(IrlError::parse(ln, "`L` line must directly follow the header"));
            }
            let ls = rest
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| IrlError::parse(ln, "bad trajectory length"))?;
            lengths = Some(ls);
            continue;
        }
        let mut toks = l.split_whitespace();
        let pair = match (toks.next(), toks.next(), toks.next()) {
            (Some(x), Some(a), None) => x.parse().ok().zip(a.parse().ok()),
            _ => None,
        };
        let pair = pair.ok_or_else(|| IrlError::parse(ln, "expected `state action`"))?;
        if pairs.len() == m {
            return Err(IrlError::parse(ln, format!("more than {m} pairs")));
        }
        pairs.push(pair);
    }
    if pairs.len() != m {
        return Err(IrlError::parse(
            text.lines().count(),
            format!("header promises {m} pairs, found {}", pairs.len()),
        ));
    }
    match lengths {
        Some(ls) => Demonstration::new(pairs, ls).map_err(|e| IrlError::parse(2, e.to_string())),
        None => Ok(Demonstration::from_pairs(pairs)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{ConstraintMode, WeightVector};
    use crate::mdp::TabularMdp;
    use proptest::prelude::*;

    fn single_state_bundle() -> EnvironmentBundle {
        EnvironmentBundle {
            name: "one".into(),
            mdp: TabularMdp::new(1, 1, vec![1.0], 0.9, vec![1.0]).unwrap(),
            features: FeatureMap::new(1, 1, 1, vec![1.0]).unwrap(),
            true_weights: WeightVector::new(vec![1.0], ConstraintMode::L1Sphere).unwrap(),
            costs_only: false,
            absorbing: vec![],
        }
    }

    #[test]
    fn forced_dynamics() {
        let b = single_state_bundle();
        let pi = StochasticPolicy::uniform(1, 1);
        let d = sample_trajectories(&b, &pi, 2, 3, 9).unwrap();
        assert_eq!(d.pairs(), &[(0, 0); 6]);
        assert_eq!(d.lengths(), &[3, 3]);
        assert_eq!(d, sample_trajectories(&b, &pi, 2, 3, 9).unwrap());
    }

    #[test]
    fn absorbing_stops_rollout() {
        let mut b = single_state_bundle();
        b.absorbing = vec![0];
        let d = sample_trajectories(&b, &StochasticPolicy::uniform(1, 1), 4, 10, 1).unwrap();
        assert_eq!(d.m(), 0);
        assert_eq!(d.lengths(), &[0, 0, 0, 0]);
    }

    #[test]
    fn visitation_counts() {
        let d = Demonstration::from_pairs(vec![(0, 0), (0, 1), (1, 0)]);
        let mu = empirical_visitation(&d, 2).unwrap();
        assert!((mu[0] - 2.0 / 3.0).abs() < 1e-15 && (mu[1] - 1.0 / 3.0).abs() < 1e-15);
        let d = Demonstration::from_pairs(vec![(2, 0); 5]);
        assert_eq!(empirical_visitation(&d, 3).unwrap(), vec![0.0, 0.0, 1.0]);
        assert!(empirical_visitation(&Demonstration::from_pairs(vec![]), 3).is_err());
    }

    #[test]
    fn policy_ratios_and_random_walk() {
        let d = Demonstration::from_pairs(vec![(0, 0), (0, 0), (0, 1)]);
        let s = empirical_policy(&d, 2, 5).unwrap();
        assert!((s.policy.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.policy.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.policy.row(1), &[0.2; 5]);
        assert_eq!(s.visited, vec![true, false]);
        assert_eq!(s.n_pairs, 3);
    }

    #[test]
    fn horizon_default() {
        assert_eq!(default_horizon(0.95), 135);
        assert_eq!(default_horizon(0.0), 1);
        assert!(0.99f64.powi(default_horizon(0.99) as i32) < 1e-3);
        assert!(0.99f64.powi(default_horizon(0.99) as i32 - 1) >= 1e-3);
    }

    #[test]
    fn text_format() {
        let d = Demonstration::new(vec![(0, 1), (2, 3), (4, 0)], vec![2, 1]).unwrap();
        let text = write_demonstration(&d);
        assert_eq!(text, "M 3\nL 2 1\n0 1\n2 3\n4 0\n");
        assert_eq!(parse_demonstration(&text).unwrap(), d);
        let bare = parse_demonstration("# comment\nM 2\n1 1\n\n0 0\n").unwrap();
        assert_eq!(bare.lengths(), &[2]);
        assert!(parse_demonstration("M 3\n0 0\n").is_err());
        assert!(parse_demonstration("M 1\n0 0\n1 1\n").is_err());
        assert!(parse_demonstration("M 1\n0 x\n").is_err());
        assert!(parse_demonstration("M 2\nL 3\n0 0\n1 1\n").is_err());
    }

    proptest! {
        #[test]
        fn rows_always_stochastic(pairs in proptest::collection::vec((0usize..6, 0usize..4), 1..200)) {
            let d = Demonstration::from_pairs(pairs.clone());
            let s = empirical_policy(&d, 6, 4).unwrap();
            for x in 0..6 {
                let sum: f64 = s.policy.row(x).iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
                if s.visited[x] {
                    for a in 0..4 {
                        let c = s.policy.get(x, a) * s.state_counts[x] as f64;
                        prop_assert!((c - c.round()).abs() < 1e-9);
                    }
                } else {
                    prop_assert_eq!(s.visitation[x], 0.0);
                }
            }
            prop_assert!((s.visitation.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let back = parse_demonstration(&write_demonstration(&d)).unwrap();
            prop_assert_eq!(back, d);
        }
    }
}
