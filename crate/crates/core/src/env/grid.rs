//! Macro-cell grid worlds.
//!
//! Squares are indexed `row * width + col` with row 0 at the bottom. Actions
//! are `N, S, E, W, Stay`. The intended move happens with probability
//! `success_prob`; otherwise one of the five outcomes is drawn uniformly.
//! Moves off the border leave the agent in place.

use crate::env::EnvironmentBundle;
use crate::error::{IrlError, Result};
use crate::features::{indicator_features, ConstraintMode, WeightVector};
use crate::mdp::TabularMdp;

pub const N_GRID_ACTIONS: usize = 5;
pub const NORTH: usize = 0;
pub const SOUTH: usize = 1;
pub const EAST: usize = 2;
pub const WEST: usize = 3;
pub const STAY: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridLayout {
    NarrowPassage,
    Paths,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridWorldSpec {
    pub width: usize,
    pub height: usize,
    pub macro_cell_size: usize,
    pub success_prob: f64,
    pub discount: f64,
    pub layout: GridLayout,
    /// Per-macro-cell reward, row-major over the macro grid.
    pub reward_by_cell: Vec<f64>,
}

pub const DEFAULT_SUCCESS_PROB: f64 = 0.7;
pub const DEFAULT_GRID_DISCOUNT: f64 = 0.95;

impl GridWorldSpec {
    /// Goal in the top-right macro-cell, a pit row across the middle of the
    /// macro grid broken by a one-cell corridor. Raw rewards `{1, 0, −1}`
    /// are rescaled to `[0, 1]`.
    pub fn narrow_passage(width: usize, height: usize, macro_cell_size: usize) -> Self {
        let (mw, mh) = macro_dims(width, height, macro_cell_size);
        let mut raw = vec![0.0; mw * mh];
        if mw * mh > 0 {
            let pit_row = mh / 2;
            let corridor = mw / 2;
            for c in 0..mw {
                if c != corridor {
                    raw[pit_row * mw + c] = -1.0;
                }
            }
            raw[(mh - 1) * mw + (mw - 1)] = 1.0;
        }
        GridWorldSpec {
            width,
            height,
            macro_cell_size,
            success_prob: DEFAULT_SUCCESS_PROB,
            discount: DEFAULT_GRID_DISCOUNT,
            layout: GridLayout::NarrowPassage,
            reward_by_cell: raw.iter().map(|r| (r + 1.0) / 2.0).collect(),
        }
    }

    /// Goal in the top-right macro-cell reached by three paths: along the
    /// left and top edges, along the bottom and right edges, and a staircase
    /// on the diagonal. Goal 1.0, path cells 0.25, elsewhere 0.
    pub fn paths(width: usize, height: usize, macro_cell_size: usize) -> Self {
        let (mw, mh) = macro_dims(width, height, macro_cell_size);
        let mut r = vec![0.0; mw * mh];
        if mw * mh > 0 {
            for row in 0..mh {
                for col in 0..mw {
                    let on_edge = col == 0 || row == mh - 1 || row == 0 || col == mw - 1;
                    let on_stair = row * mw == col * mh || (row + 1) * mw == col * mh;
                    if on_edge || on_stair {
                        r[row * mw + col] = 0.25;
                    }
                }
            }
            r[(mh - 1) * mw + (mw - 1)] = 1.0;
        }
        GridWorldSpec {
            width,
            height,
            macro_cell_size,
            success_prob: DEFAULT_SUCCESS_PROB,
            discount: DEFAULT_GRID_DISCOUNT,
            layout: GridLayout::Paths,
            reward_by_cell: r,
        }
    }

    pub fn macro_width(&self) -> usize {
        self.width / self.macro_cell_size.max(1)
    }

    pub fn macro_height(&self) -> usize {
        self.height / self.macro_cell_size.max(1)
    }

    pub fn n_cells(&self) -> usize {
        self.macro_width() * self.macro_height()
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.macro_cell_size == 0 {
            return Err(IrlError::InvalidInput("grid dimensions must be positive".into()));
        }
        if !self.width.is_multiple_of(self.macro_cell_size) || !self.height.is_multiple_of(self.macro_cell_size) {
            return Err(IrlError::InvalidInput(format!(
                "{}x{} grid is not divisible into {}x{} macro-cells",
                self.width, self.height, self.macro_cell_size, self.macro_cell_size
            )));
        }
        if !(self.success_prob > 0.0 && self.success_prob <= 1.0) {
            return Err(IrlError::InvalidInput(format!(
                "success probability {} outside (0, 1]",
                self.success_prob
            )));
        }
        if self.reward_by_cell.len() != self.n_cells() {
            return Err(IrlError::InvalidInput(format!(
                "{} cell rewards for {} macro-cells",
                self.reward_by_cell.len(),
                self.n_cells()
            )));
        }
        if self.reward_by_cell.iter().any(|r| !r.is_finite())
            || !self.reward_by_cell.iter().any(|&r| r > 0.0)
        {
            return Err(IrlError::InvalidInput(
                "cell rewards must be finite with a positive maximum".into(),
            ));
        }
        Ok(())
    }

    pub fn cell_of(&self, row: usize, col: usize) -> usize {
        (row / self.macro_cell_size) * self.macro_width() + col / self.macro_cell_size
    }
}

fn macro_dims(width: usize, height: usize, mcs: usize) -> (usize, usize) {
    if mcs == 0 {
        (0, 0)
    } else {
        (width / mcs, height / mcs)
    }
}

fn step(spec: &GridWorldSpec, row: usize, col: usize, action: usize) -> (usize, usize) {
    match action {
        NORTH if row + 1 < spec.height => (row + 1, col),
        SOUTH if row > 0 => (row - 1, col),
        EAST if col + 1 < spec.width => (row, col + 1),
        WEST if col > 0 => (row, col - 1),
        _ => (row, col),
    }
}

/// Builds the grid MDP with macro-cell indicator features. The true weights
/// are the cell rewards scaled by `(1−γ)/max` so that values stay in `[0, 1]`.
pub fn build_grid_world(spec: &GridWorldSpec) -> Result<EnvironmentBundle> {
    spec.validate()?;
    let n = spec.width * spec.height;
    let slip = (1.0 - spec.success_prob) / N_GRID_ACTIONS as f64;
    let mut transition = vec![0.0; n * N_GRID_ACTIONS * n];
    for row in 0..spec.height {
        for col in 0..spec.width {
            let x = row * spec.width + col;
            for a in 0..N_GRID_ACTIONS {
                let base = (x * N_GRID_ACTIONS + a) * n;
                let (r, c) = step(spec, row, col, a);
                transition[base + r * spec.width + c] += spec.success_prob;
                if slip > 0.0 {
                    for d in 0..N_GRID_ACTIONS {
                        let (r, c) = step(spec, row, col, d);
                        transition[base + r * spec.width + c] += slip;
                    }
                }
            }
        }
    }
    let mdp = TabularMdp::new(
        n,
        N_GRID_ACTIONS,
        transition,
        spec.discount,
        vec![1.0 / n as f64; n],
    )?;
    let cell_of: Vec<usize> = (0..n)
        .map(|x| spec.cell_of(x / spec.width, x % spec.width))
        .collect();
    let features = indicator_features(n, N_GRID_ACTIONS, &cell_of, spec.n_cells())?;
    let max = spec.reward_by_cell.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = (1.0 - spec.discount) / max;
    let theta = spec.reward_by_cell.iter().map(|r| r * scale).collect();
    let name = match spec.layout {
        GridLayout::NarrowPassage => "narrow-passage",
        GridLayout::Paths => "paths",
    };
    Ok(EnvironmentBundle {
        name: format!(
            "{name}-{}x{}-m{}",
            spec.width, spec.height, spec.macro_cell_size
        ),
        mdp,
        features,
        true_weights: WeightVector::new(theta, ConstraintMode::Unconstrained)?,
        costs_only: false,
        absorbing: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::assemble_reward;
    use crate::mdp::{greedy_policy, q_from_v, value_iteration};

    #[test]
    fn narrow_passage_layout() {
        let spec = GridWorldSpec::narrow_passage(10, 10, 2);
        assert_eq!(spec.n_cells(), 25);
        let r = &spec.reward_by_cell;
        assert_eq!(r[24], 1.0);
        assert_eq!(r[10], 0.0);
        assert_eq!(r[11], 0.0);
        assert_eq!(r[12], 0.5);
        assert_eq!(r[13], 0.0);
        assert_eq!(r[14], 0.0);
        assert_eq!(r.iter().filter(|&&v| v == 0.5).count(), 20);
    }

    #[test]
    fn paths_layout() {
        let spec = GridWorldSpec::paths(10, 10, 1);
        assert_eq!(spec.n_cells(), 100);
        assert_eq!(spec.reward_by_cell[99], 1.0);
        assert_eq!(spec.reward_by_cell[0], 0.25);
        assert_eq!(spec.reward_by_cell[5 * 10 + 5], 0.25);
        assert_eq!(spec.reward_by_cell[5 * 10 + 2], 0.0);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = GridWorldSpec::narrow_passage(10, 10, 2);
        spec.macro_cell_size = 3;
        assert!(build_grid_world(&spec).is_err());
        let mut spec = GridWorldSpec::narrow_passage(10, 10, 2);
        spec.success_prob = 0.0;
        assert!(build_grid_world(&spec).is_err());
        let mut spec = GridWorldSpec::narrow_passage(10, 10, 2);
        spec.reward_by_cell.pop();
        assert!(build_grid_world(&spec).is_err());
    }

    #[test]
    fn dynamics_and_features() {
        let b = build_grid_world(&GridWorldSpec::narrow_passage(10, 10, 2)).unwrap();
        assert_eq!(b.mdp.n_actions(), 5);
        assert_eq!(b.features.n_features(), 25);
        // interior square, move north
        let x = 4 * 10 + 4;
        assert!((b.mdp.transition_prob(x, NORTH, x + 10) - (0.7 + 0.06)).abs() < 1e-15);
        assert!((b.mdp.transition_prob(x, NORTH, x) - 0.06).abs() < 1e-15);
        // corner: N, E and Stay share the same outcome distribution
        let c = 99;
        assert_eq!(b.mdp.transition_row(c, NORTH), b.mdp.transition_row(c, STAY));
        assert_eq!(b.mdp.transition_row(c, EAST), b.mdp.transition_row(c, STAY));
        for x in 0..100 {
            for a in 1..5 {
                assert_eq!(b.features.pair(x, 0), b.features.pair(x, a));
            }
        }
    }

    #[test]
    fn deterministic_myopic_greedy() {
        let mut spec = GridWorldSpec::paths(6, 6, 1);
        spec.success_prob = 1.0;
        spec.discount = 0.0;
        let b = build_grid_world(&spec).unwrap();
        let r = assemble_reward(&b.features, &b.true_weights).unwrap();
        let v = value_iteration(&b.mdp, &r, 1e-10, 10).unwrap();
        let q = q_from_v(&b.mdp, &r, &v).unwrap();
        let pi = greedy_policy(&q);
        for (x, a) in pi.greedy_actions().into_iter().enumerate() {
            for other in 0..5 {
                assert!(r.get(x, a) >= r.get(x, other));
            }
        }
    }
}
