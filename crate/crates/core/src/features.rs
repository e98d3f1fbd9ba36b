//! Linear reward parameterization `R_θ(x,a) = Σ_i θ_i φ_i(x,a)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{IrlError, Result};
use crate::mdp::{RewardTable, TabularMdp};

/// Tolerance on the unit-L1-norm constraint.
pub const NORM_TOL: f64 = 1e-10;

/// `φ(x, a)` stored as `values[(x * n_actions + a) * n_features + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    n_states: usize,
    n_actions: usize,
    n_features: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        n_features: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if n_features == 0 {
            return Err(IrlError::InvalidInput("a feature map needs at least one feature".into()));
        }
        if values.len() != n_states * n_actions * n_features {
            return Err(IrlError::DimensionMismatch(format!(
                "feature tensor has {} entries, expected {}x{}x{}",
                values.len(),
                n_states,
                n_actions,
                n_features
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(IrlError::InvalidInput("feature tensor has non-finite entries".into()));
        }
        Ok(FeatureMap {
            n_states,
            n_actions,
            n_features,
            values,
        })
    }

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

    /// All features of the pair `(x, a)`.
    #[inline]
    pub fn pair(&self, x: usize, a: usize) -> &[f64] {
        let start = (x * self.n_actions + a) * self.n_features;
        &self.values[start..start + self.n_features]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn check_mdp(&self, mdp: &TabularMdp) -> Result<()> {
        if self.n_states != mdp.n_states() || self.n_actions != mdp.n_actions() {
            return Err(IrlError::DimensionMismatch(format!(
                "features are {}x{}, MDP is {}x{}",
                self.n_states,
                self.n_actions,
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintMode {
    /// `‖θ‖₁ = 1`, signs free.
    L1Sphere,
    /// Probability simplex: `θ ≥ 0`, `‖θ‖₁ = 1`.
    NonnegSimplex,
    Unconstrained,
}

impl fmt::Display for ConstraintMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstraintMode::L1Sphere => "l1-sphere",
            ConstraintMode::NonnegSimplex => "nonneg-simplex",
            ConstraintMode::Unconstrained => "unconstrained",
        })
    }
}

impl FromStr for ConstraintMode {
    type Err = IrlError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "l1-sphere" | "l1" => Ok(ConstraintMode::L1Sphere),
            "nonneg-simplex" | "simplex" => Ok(ConstraintMode::NonnegSimplex),
            "unconstrained" | "none" => Ok(ConstraintMode::Unconstrained),
            other => Err(IrlError::InvalidInput(format!("unknown constraint mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    theta: Vec<f64>,
    mode: ConstraintMode,
}

impl WeightVector {
    /// Wraps `theta`, checking it satisfies `mode`.
    pub fn new(theta: Vec<f64>, mode: ConstraintMode) -> Result<Self> {
        if theta.is_empty() || theta.iter().any(|v| !v.is_finite()) {
            return Err(IrlError::InvalidInput("weights must be finite and non-empty".into()));
        }
        match mode {
            ConstraintMode::Unconstrained => {}
            ConstraintMode::L1Sphere | ConstraintMode::NonnegSimplex => {
                let n1: f64 = theta.iter().map(|v| v.abs()).sum();
                if (n1 - 1.0).abs() > NORM_TOL {
                    return Err(IrlError::InvalidInput(format!("‖θ‖₁ = {n1}, expected 1")));
                }
                if mode == ConstraintMode::NonnegSimplex && theta.iter().any(|&v| v < 0.0) {
                    return Err(IrlError::InvalidInput("simplex weights must be nonnegative".into()));
                }
            }
        }
        Ok(WeightVector { theta, mode })
    }

    /// Uniform start `θ_i = ±1/N`; negative for cost-only environments
    /// unless the mode forbids negative weights.
    pub fn uniform(n: usize, mode: ConstraintMode, costs_only: bool) -> Result<Self> {
        let sign = if costs_only && mode != ConstraintMode::NonnegSimplex {
            -1.0
        } else {
            1.0
        };
        WeightVector::new(vec![sign / n as f64; n], mode)
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn mode(&self) -> ConstraintMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// `R(x,a) = Σ_i θ_i φ_i(x,a)`.
pub fn assemble_reward(features: &FeatureMap, w: &WeightVector) -> Result<RewardTable> {
    assemble_reward_raw(features, w.theta())
}

pub(crate) fn assemble_reward_raw(features: &FeatureMap, theta: &[f64]) -> Result<RewardTable> {
    if theta.len() != features.n_features() {
        return Err(IrlError::DimensionMismatch(format!(
            "{} weights for {} features",
            theta.len(),
            features.n_features()
        )));
    }
    let values = features
        .as_slice()
        .chunks_exact(features.n_features())
        .map(|phi| phi.iter().zip(theta).map(|(f, t)| f * t).sum())
        .collect();
    RewardTable::new(features.n_states(), features.n_actions(), values)
}

/// One state-only indicator feature per cell of the partition `cell_of`.
pub fn indicator_features(
    n_states: usize,
    n_actions: usize,
    cell_of: &[usize],
    n_cells: usize,
) -> Result<FeatureMap> {
    if cell_of.len() != n_states {
        return Err(IrlError::DimensionMismatch(format!(
            "cell map covers {} states, expected {n_states}",
            cell_of.len()
        )));
    }
    if let Some((x, &c)) = cell_of.iter().enumerate().find(|(_, &c)| c >= n_cells) {
        return Err(IrlError::InvalidInput(format!(
            "state {x} maps to cell {c}, only {n_cells} cells"
        )));
    }
    let mut values = vec![0.0; n_states * n_actions * n_cells];
    for (x, &c) in cell_of.iter().enumerate() {
        for a in 0..n_actions {
            values[(x * n_actions + a) * n_cells + c] = 1.0;
        }
    }
    FeatureMap::new(n_states, n_actions, n_cells, values)
}

/// Maps raw weights onto the feasible set of `mode`.
///
/// The simplex case is the Euclidean projection computed by sorting and
/// thresholding.
pub fn project_weights(theta_raw: &[f64], mode: ConstraintMode) -> Result<WeightVector> {
    if theta_raw.is_empty() || theta_raw.iter().any(|v| !v.is_finite()) {
        return Err(IrlError::InvalidInput("weights must be finite and non-empty".into()));
    }
    let theta = match mode {
        ConstraintMode::Unconstrained => theta_raw.to_vec(),
        ConstraintMode::L1Sphere => {
            let n1: f64 = theta_raw.iter().map(|v| v.abs()).sum();
            if n1 == 0.0 {
                return Err(IrlError::InvalidInput(
                    "cannot L1-normalize an all-zero weight vector".into(),
                ));
            }
            theta_raw.iter().map(|v| v / n1).collect()
        }
        ConstraintMode::NonnegSimplex => simplex_projection(theta_raw),
    };
    WeightVector::new(theta, mode)
}

fn simplex_projection(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    let mut out: Vec<f64> = v.iter().map(|x| (x - tau).max(0.0)).collect();
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= s);
    out
}
