//! End-to-end behaviour of the three IRL algorithms on small problems.

use mlirl::demo::{empirical_feature_expectations, empirical_policy, Demonstration};
use mlirl::estimators::{fp_feature_expectations, EstimatorKind};
use mlirl::features::{assemble_reward, indicator_features, ConstraintMode, FeatureMap, WeightVector};
use mlirl::irl::{run_irl, Algorithm, IrlConfig, RewardlessMdp};
use mlirl::mdp::{boltzmann_policy, solve_optimal, BoltzmannConfig, StochasticPolicy, TabularMdp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Three states on a ring; action 0 stays, 1 moves forward, 2 moves back,
/// each with 10% slip to a uniform state.
fn ring() -> TabularMdp {
    let (n, m) = (3, 3);
    let mut t = vec![0.0; n * m * n];
    for x in 0..n {
        for a in 0..m {
            let y = match a {
                0 => x,
                1 => (x + 1) % n,
                _ => (x + n - 1) % n,
            };
            for z in 0..n {
                t[(x * m + a) * n + z] = 0.1 / n as f64;
            }
            t[(x * m + a) * n + y] += 0.9;
        }
    }
    TabularMdp::new(n, m, t, 0.9, vec![1.0 / 3.0; 3]).unwrap()
}

fn draw(rng: &mut ChaCha8Rng, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, q) in p.iter().enumerate() {
        acc += q;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}

#[test]
fn girl_recovers_boltzmann_expert_policy() {
    let mdp = ring();
    let features = indicator_features(3, 3, &[0, 1, 2], 3).unwrap();
    let theta0 = WeightVector::new(vec![0.1, -0.3, 0.6], ConstraintMode::L1Sphere).unwrap();
    let sol = solve_optimal(&mdp, &assemble_reward(&features, &theta0).unwrap()).unwrap();
    let expert = boltzmann_policy(&sol.q, &BoltzmannConfig::new(0.1).unwrap());

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let pairs: Vec<(usize, usize)> = (0..3000)
        .map(|i| {
            let x = i % 3;
            (x, draw(&mut rng, expert.row(x)))
        })
        .collect();
    let demo = Demonstration::from_pairs(pairs);
    let stats = empirical_policy(&demo, 3, 3).unwrap();

    let mut cfg = IrlConfig::new(Algorithm::Girl, EstimatorKind::Ia);
    cfg.temperature = 0.1;
    cfg.n_iterations = 200;
    let res = run_irl(RewardlessMdp::new(&mdp, &features), &stats, &demo, &cfg).unwrap();
    assert_eq!(res.greedy_policy.greedy_actions(), sol.policy.greedy_actions());
}

/// `(1−γ) μ^π` under the initial distribution.
fn normalized_expectations(mdp: &TabularMdp, f: &FeatureMap, pi: &StochasticPolicy) -> Vec<f64> {
    let psi = fp_feature_expectations(mdp, f, pi, 1e-12, 100_000).unwrap();
    let mut mu = vec![0.0; f.n_features()];
    for (x, d0) in mdp.initial_dist().iter().enumerate() {
        for a in 0..mdp.n_actions() {
            for (m, v) in mu.iter_mut().zip(psi.pair(x, a)) {
                *m += d0 * pi.get(x, a) * v;
            }
        }
    }
    mu.iter().map(|m| m * (1.0 - mdp.discount())).collect()
}

#[test]
fn mwal_mixture_matches_expert_feature_expectations() {
    let mdp = ring();
    let features = indicator_features(3, 3, &[0, 1, 2], 3).unwrap();
    let theta = WeightVector::new(vec![0.2, 0.3, 0.5], ConstraintMode::NonnegSimplex).unwrap();
    let sol = solve_optimal(&mdp, &assemble_reward(&features, &theta).unwrap()).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut pairs = Vec::new();
    let mut lengths = Vec::new();
    for _ in 0..400 {
        let mut x = draw(&mut rng, mdp.initial_dist());
        for _ in 0..150 {
            let a = sol.policy.greedy_actions()[x];
            pairs.push((x, a));
            x = draw(&mut rng, mdp.transition_row(x, a));
        }
        lengths.push(150);
    }
    let demo = Demonstration::new(pairs, lengths).unwrap();
    let stats = empirical_policy(&demo, 3, 3).unwrap();
    let mu_e: Vec<f64> = empirical_feature_expectations(&demo, &features, 0.9)
        .unwrap()
        .iter()
        .map(|m| m * 0.1)
        .collect();

    let mut cfg = IrlConfig::new(Algorithm::Mwal, EstimatorKind::Fp);
    cfg.constraint_mode = ConstraintMode::NonnegSimplex;
    cfg.n_iterations = 400;
    let res = run_irl(RewardlessMdp::new(&mdp, &features), &stats, &demo, &cfg).unwrap();

    // average the iterates' own expectations: the trajectory-level mixture
    let mut mu_mix = vec![0.0; 3];
    for r in &res.trace.records {
        let pi = StochasticPolicy::deterministic(3, &r.greedy).unwrap();
        for (m, v) in mu_mix.iter_mut().zip(normalized_expectations(&mdp, &features, &pi)) {
            *m += v / res.trace.len() as f64;
        }
    }
    // the game guarantee: no simplex reward prefers the expert by more than ε
    let worst = mu_e.iter().zip(&mu_mix).map(|(e, m)| e - m).fold(f64::NEG_INFINITY, f64::max);
    assert!(worst < 0.05, "expert {mu_e:?} vs mixture {mu_mix:?}");
}

#[test]
fn all_algorithms_trace_every_iteration() {
    let mdp = ring();
    let features = indicator_features(3, 3, &[0, 1, 2], 3).unwrap();
    let demo = Demonstration::from_pairs(vec![(0, 1), (1, 1), (2, 0), (2, 0)]);
    let stats = empirical_policy(&demo, 3, 3).unwrap();
    for alg in Algorithm::ALL {
        for est in EstimatorKind::ALL {
            let mut cfg = IrlConfig::new(alg, est);
            if alg == Algorithm::Mwal {
                cfg.constraint_mode = ConstraintMode::NonnegSimplex;
            }
            cfg.n_iterations = 7;
            let res = run_irl(RewardlessMdp::new(&mdp, &features), &stats, &demo, &cfg).unwrap();
            assert_eq!(res.trace.len(), 7, "{alg}-{est}");
            assert!(res.best_iteration < 7);
            let l1: f64 = res.final_weights.theta().iter().map(|t| t.abs()).sum();
            assert!((l1 - 1.0).abs() < 1e-9, "{alg}-{est}: ‖θ‖₁ = {l1}");
        }
    }
}
