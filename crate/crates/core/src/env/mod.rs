//! Benchmark environments and the catalog of named defaults.

mod grid;
mod io;
mod sailing;

pub use grid::{
    build_grid_world, GridLayout, GridWorldSpec, DEFAULT_GRID_DISCOUNT, DEFAULT_SUCCESS_PROB,
    EAST, NORTH, N_GRID_ACTIONS, SOUTH, STAY, WEST,
};
pub use io::{parse_bundle, read_bundle, write_bundle, BUNDLE_MAGIC};
pub use sailing::{
    build_sailing, heading_class, tack_after, HeadingClass, SailingSpec, DEFAULT_SAILING_DISCOUNT,
    DEFAULT_WIND_PERSISTENCE, DELAY_FEATURE, FEATURE_NAMES, N_SAILING_FEATURES, TRUE_THETA,
};

use crate::error::{IrlError, Result};
use crate::features::{FeatureMap, WeightVector};
use crate::mdp::TabularMdp;

/// An MDP with its feature map and ground-truth weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentBundle {
    pub name: String,
    pub mdp: TabularMdp,
    pub features: FeatureMap,
    pub true_weights: WeightVector,
    /// Every feature weight is a cost (sailing).
    pub costs_only: bool,
    /// States where sampled trajectories stop.
    pub absorbing: Vec<usize>,
}

impl EnvironmentBundle {
    pub fn validate(&self) -> Result<()> {
        self.features.check_mdp(&self.mdp)?;
        if self.true_weights.len() != self.features.n_features() {
            return Err(IrlError::DimensionMismatch(format!(
                "{} true weights for {} features",
                self.true_weights.len(),
                self.features.n_features()
            )));
        }
        if let Some(&x) = self.absorbing.iter().find(|&&x| x >= self.mdp.n_states()) {
            return Err(IrlError::InvalidInput(format!("absorbing state {x} out of range")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    Grid(GridWorldSpec),
    Sailing(SailingSpec),
}

impl EnvSpec {
    pub fn build(&self) -> Result<EnvironmentBundle> {
        match self {
            EnvSpec::Grid(s) => build_grid_world(s),
            EnvSpec::Sailing(s) => build_sailing(s),
        }
    }

    pub fn discount(&self) -> f64 {
        match self {
            EnvSpec::Grid(s) => s.discount,
            EnvSpec::Sailing(s) => s.discount,
        }
    }

    pub fn is_sailing(&self) -> bool {
        matches!(self, EnvSpec::Sailing(_))
    }
}

/// Named environments with their default specs.
pub fn env_catalog() -> Vec<(&'static str, EnvSpec)> {
    vec![
        (
            "narrow-passage-2x2",
            EnvSpec::Grid(GridWorldSpec::narrow_passage(10, 10, 2)),
        ),
        ("paths-10x10", EnvSpec::Grid(GridWorldSpec::paths(10, 10, 1))),
        ("sailing-small", EnvSpec::Sailing(SailingSpec::new(5))),
        // grid size is a guess at the original scale
        ("sailing-paper", EnvSpec::Sailing(SailingSpec::new(10))),
    ]
}

pub fn lookup_env(name: &str) -> Result<EnvSpec> {
    env_catalog()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| s)
        .ok_or_else(|| IrlError::NotFound(name.to_string()))
}

/// Looks up and builds a catalog entry, naming the bundle after it.
pub fn build_named(name: &str) -> Result<EnvironmentBundle> {
    let mut b = lookup_env(name)?.build()?;
    b.name = name.to_string();
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_entries() {
        match lookup_env("narrow-passage-2x2").unwrap() {
            EnvSpec::Grid(s) => assert_eq!(s.macro_cell_size, 2),
            _ => panic!(),
        }
        match lookup_env("sailing-small").unwrap() {
            EnvSpec::Sailing(s) => assert_eq!(s.grid_side, 5),
            _ => panic!(),
        }
        for name in ["paths-10x10", "sailing-paper"] {
            assert!(lookup_env(name).is_ok());
        }
        assert!(matches!(lookup_env("nope"), Err(IrlError::NotFound(_))));
    }

    #[test]
    fn builds_are_identical() {
        let a = build_named("sailing-small").unwrap();
        let b = build_named("sailing-small").unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
    }
}
