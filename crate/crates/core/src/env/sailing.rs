//! The sailing problem: reach a goal square in minimum time under a
//! stochastic wind.
//!
//! A state is `(row, col, wind, tack)` plus one absorbing goal state. The
//! eight actions are compass headings `N, NE, E, SE, S, SW, W, NW`; `wind`
//! uses the same indexing and names the direction the wind blows towards.
//! The heading class of an action is its angular distance from the wind:
//! 0 steps is `away` (running before the wind), 4 steps is `into`.

use crate::env::EnvironmentBundle;
use crate::error::{IrlError, Result};
use crate::features::{ConstraintMode, FeatureMap, WeightVector};
use crate::mdp::TabularMdp;

pub const N_HEADINGS: usize = 8;
pub const N_WIND: usize = 8;
pub const N_TACKS: usize = 2;
pub const N_SAILING_FEATURES: usize = 6;
pub const FEATURE_NAMES: [&str; N_SAILING_FEATURES] = ["away", "down", "cross", "up", "into", "delay"];
pub const DELAY_FEATURE: usize = 5;
pub const TRUE_THETA: [f64; N_SAILING_FEATURES] = [-1.0, -2.0, -3.0, -4.0, -100000.0, -3.0];
pub const DEFAULT_WIND_PERSISTENCE: f64 = 0.4;
pub const DEFAULT_SAILING_DISCOUNT: f64 = 0.99;

/// `(d_row, d_col)` per heading.
const HEADINGS: [(isize, isize); N_HEADINGS] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadingClass {
    Away = 0,
    Down = 1,
    Cross = 2,
    Up = 3,
    Into = 4,
}

pub fn heading_class(action: usize, wind: usize) -> HeadingClass {
    let diff = (action + N_HEADINGS - wind) % N_HEADINGS;
    match diff.min(N_HEADINGS - diff) {
        0 => HeadingClass::Away,
        1 => HeadingClass::Down,
        2 => HeadingClass::Cross,
        3 => HeadingClass::Up,
        _ => HeadingClass::Into,
    }
}

/// Tack after sailing `action` under `wind`: the side of the wind the
/// heading falls on, unchanged when sailing dead downwind or upwind.
pub fn tack_after(action: usize, wind: usize, tack: usize) -> usize {
    match (action + N_HEADINGS - wind) % N_HEADINGS {
        1..=3 => 0,
        5..=7 => 1,
        _ => tack,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SailingSpec {
    pub grid_side: usize,
    pub wind_persistence: f64,
    /// `(row, col)`, row 0 at the bottom.
    pub goal: (usize, usize),
    pub start: (usize, usize),
    pub true_theta: Vec<f64>,
    pub discount: f64,
}

impl SailingSpec {
    /// Start at the bottom centre, goal at the top centre.
    pub fn new(grid_side: usize) -> Self {
        SailingSpec {
            grid_side,
            wind_persistence: DEFAULT_WIND_PERSISTENCE,
            goal: (grid_side.saturating_sub(1), grid_side / 2),
            start: (0, grid_side / 2),
            true_theta: TRUE_THETA.to_vec(),
            discount: DEFAULT_SAILING_DISCOUNT,
        }
    }

    pub fn n_states(&self) -> usize {
        self.grid_side * self.grid_side * N_WIND * N_TACKS + 1
    }

    pub fn goal_state(&self) -> usize {
        self.n_states() - 1
    }

    pub fn state_index(&self, row: usize, col: usize, wind: usize, tack: usize) -> usize {
        ((row * self.grid_side + col) * N_WIND + wind) * N_TACKS + tack
    }

    /// Inverse of [`SailingSpec::state_index`]; `None` for the goal state.
    pub fn decode(&self, x: usize) -> Option<(usize, usize, usize, usize)> {
        if x >= self.goal_state() {
            return None;
        }
        let tack = x % N_TACKS;
        let wind = (x / N_TACKS) % N_WIND;
        let pos = x / (N_TACKS * N_WIND);
        Some((pos / self.grid_side, pos % self.grid_side, wind, tack))
    }

    fn validate(&self) -> Result<()> {
        if self.grid_side < 2 {
            return Err(IrlError::InvalidInput("sailing grid side must be at least 2".into()));
        }
        if !(self.wind_persistence > 0.0 && self.wind_persistence <= 1.0) {
            return Err(IrlError::InvalidInput(format!(
                "wind persistence {} outside (0, 1]",
                self.wind_persistence
            )));
        }
        let inside = |(r, c): (usize, usize)| r < self.grid_side && c < self.grid_side;
        if !inside(self.goal) || !inside(self.start) {
            return Err(IrlError::InvalidInput("goal and start must lie inside the grid".into()));
        }
        if self.goal == self.start {
            return Err(IrlError::InvalidInput("start coincides with the goal".into()));
        }
        if self.true_theta.len() != N_SAILING_FEATURES {
            return Err(IrlError::InvalidInput(format!(
                "sailing needs {N_SAILING_FEATURES} weights, got {}",
                self.true_theta.len()
            )));
        }
        Ok(())
    }
}

pub fn build_sailing(spec: &SailingSpec) -> Result<EnvironmentBundle> {
    spec.validate()?;
    let side = spec.grid_side;
    let n = spec.n_states();
    let goal = spec.goal_state();
    let turn = (1.0 - spec.wind_persistence) / 2.0;

    let mut transition = vec![0.0; n * N_HEADINGS * n];
    let mut phi = vec![0.0; n * N_HEADINGS * N_SAILING_FEATURES];
    for x in 0..n {
        for a in 0..N_HEADINGS {
            let base = (x * N_HEADINGS + a) * n;
            let Some((row, col, wind, tack)) = spec.decode(x) else {
                transition[base + goal] = 1.0;
                continue;
            };
            let f = &mut phi[(x * N_HEADINGS + a) * N_SAILING_FEATURES..][..N_SAILING_FEATURES];
            f[heading_class(a, wind) as usize] = 1.0;
            let new_tack = tack_after(a, wind, tack);
            if new_tack != tack {
                f[DELAY_FEATURE] = 1.0;
            }

            let (dr, dc) = HEADINGS[a];
            let (r, c) = (row as isize + dr, col as isize + dc);
            let (r, c) = if (0..side as isize).contains(&r) && (0..side as isize).contains(&c) {
                (r as usize, c as usize)
            } else {
                (row, col)
            };
            if (r, c) == spec.goal {
                transition[base + goal] = 1.0;
                continue;
            }
            for (w, p) in [
                (wind, spec.wind_persistence),
                ((wind + 1) % N_WIND, turn),
                ((wind + N_WIND - 1) % N_WIND, turn),
            ] {
                transition[base + spec.state_index(r, c, w, new_tack)] += p;
            }
        }
    }

    let mut initial = vec![0.0; n];
    let p0 = 1.0 / (N_WIND * N_TACKS) as f64;
    for wind in 0..N_WIND {
        for tack in 0..N_TACKS {
            initial[spec.state_index(spec.start.0, spec.start.1, wind, tack)] = p0;
        }
    }

    let mdp = TabularMdp::new(n, N_HEADINGS, transition, spec.discount, initial)?;
    let features = FeatureMap::new(n, N_HEADINGS, N_SAILING_FEATURES, phi)?;
    Ok(EnvironmentBundle {
        name: format!("sailing-{side}x{side}"),
        mdp,
        features,
        true_weights: WeightVector::new(spec.true_theta.clone(), ConstraintMode::Unconstrained)?,
        costs_only: true,
        absorbing: vec![goal],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heading_classes() {
        assert_eq!(heading_class(0, 0), HeadingClass::Away);
        assert_eq!(heading_class(1, 0), HeadingClass::Down);
        assert_eq!(heading_class(7, 0), HeadingClass::Down);
        assert_eq!(heading_class(2, 0), HeadingClass::Cross);
        assert_eq!(heading_class(5, 0), HeadingClass::Up);
        assert_eq!(heading_class(4, 0), HeadingClass::Into);
        assert_eq!(heading_class(2, 7), HeadingClass::Up);
    }

    #[test]
    fn tack_rule() {
        assert_eq!(tack_after(2, 0, 1), 0);
        assert_eq!(tack_after(6, 0, 0), 1);
        assert_eq!(tack_after(0, 0, 1), 1);
        assert_eq!(tack_after(4, 0, 0), 0);
    }

    #[test]
    fn downwind_features() {
        let spec = SailingSpec::new(5);
        let b = build_sailing(&spec).unwrap();
        let x = spec.state_index(1, 1, 2, 0);
        assert_eq!(b.features.pair(x, 2), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        // crossing to the other side of the wind costs a tack change
        let x = spec.state_index(1, 1, 0, 0);
        assert_eq!(b.features.pair(x, 6), &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn state_count_and_goal() {
        let spec = SailingSpec::new(5);
        let b = build_sailing(&spec).unwrap();
        assert_eq!(b.mdp.n_states(), 401);
        assert_eq!(b.absorbing, vec![400]);
        assert!(b.mdp.is_absorbing(400));
        assert!(b.features.pair(400, 3).iter().all(|&f| f == 0.0));
        for x in 0..400 {
            assert_eq!(spec.decode(x).map(|(r, c, w, t)| spec.state_index(r, c, w, t)), Some(x));
        }
    }

    #[test]
    fn wind_chain_probabilities() {
        let spec = SailingSpec::new(5);
        let b = build_sailing(&spec).unwrap();
        let x = spec.state_index(1, 2, 3, 0);
        let succ = b.mdp.successors(x, 0);
        assert_eq!(succ.len(), 3);
        let probs: Vec<f64> = succ.iter().map(|s| s.1).collect();
        assert!(probs.contains(&0.4));
        assert_eq!(probs.iter().filter(|&&p| p == 0.3).count(), 2);
    }

    #[test]
    fn rejects_bad_spec() {
        let mut spec = SailingSpec::new(5);
        spec.goal = (7, 0);
        assert!(build_sailing(&spec).is_err());
        let mut spec = SailingSpec::new(5);
        spec.true_theta.pop();
        assert!(build_sailing(&spec).is_err());
    }
}
