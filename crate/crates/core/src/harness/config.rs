//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # narrow passage, GIRL with the fixed-point estimator
//! env = narrow-passage-2x2
//! algorithm = GIRL
//! estimator = FP
//! iterations = 100
//! repeats = 10
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::demo::{default_horizon, ExpertMode};
use crate::env::lookup_env;
use crate::error::{IrlError, Result};
use crate::estimators::{EstimatorKind, Fp1Mode};
use crate::features::ConstraintMode;
use crate::irl::{Algorithm, IrlConfig, GRID_TEMPERATURE, SAILING_STEP_SIZE, SAILING_TEMPERATURE};

pub const GRID_TRAJECTORIES: usize = 200;
pub const SAILING_TRAJECTORIES_DESK: usize = 512;
pub const SAILING_TRAJECTORIES_PAPER: usize = 5120;
pub const DEFAULT_REPEATS: usize = 10;

pub const KEYS: &[&str] = &[
    "env",
    "algorithm",
    "estimator",
    "temperature",
    "step_size",
    "iterations",
    "constraint",
    "seed",
    "n_traj",
    "horizon",
    "expert",
    "repeats",
    "out",
    "backtracking",
    "scale",
    "record_timing",
    "fp1_mode",
    "vi_tol",
    "fp_tol",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    #[default]
    Desk,
    Paper,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Desk => "desk",
            Scale::Paper => "paper",
        })
    }
}

impl FromStr for Scale {
    type Err = IrlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            other => Err(IrlError::Config(format!("unknown scale `{other}`"))),
        }
    }
}

/// Ordered key/value pairs before defaults are applied. Later entries
/// override earlier ones, which is how command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawConfig {
    entries: Vec<(String, String)>,
}

impl RawConfig {
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KEYS.contains(&key) {
            return Err(IrlError::Config(format!("unknown key `{key}`")));
        }
        let value = value.into();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }
}

pub fn parse_config_text(text: &str) -> Result<RawConfig> {
    let mut raw = RawConfig::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(IrlError::parse(i + 1, "expected `key = value`"));
        };
        let (key, value) = (key.trim(), value.trim());
        if raw.get(key).is_some() {
            return Err(IrlError::parse(i + 1, format!("duplicate key `{key}`")));
        }
        raw.set(key, value).map_err(|e| IrlError::parse(i + 1, e.to_string()))?;
    }
    Ok(raw)
}

pub fn read_config(path: &Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| IrlError::io(path, e))?;
    parse_config_text(&text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: String,
    pub irl: IrlConfig,
    pub n_traj: usize,
    pub horizon: usize,
    pub expert: ExpertMode,
    pub n_repeats: usize,
    pub out: Option<PathBuf>,
    pub scale: Scale,
    /// When false, wall times are written as zero so outputs are
    /// byte-identical across runs.
    pub record_timing: bool,
}

fn value<T: FromStr>(raw: &RawConfig, key: &str) -> Result<Option<T>> {
    raw.get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| IrlError::Config(format!("bad value `{v}` for `{key}`")))
        })
        .transpose()
}

fn flag(raw: &RawConfig, key: &str) -> Result<Option<bool>> {
    raw.get(key)
        .map(|v| match v {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(IrlError::Config(format!("bad boolean `{v}` for `{key}`"))),
        })
        .transpose()
}

fn config_err(e: IrlError) -> IrlError {
    match e {
        IrlError::Config(_) => e,
        other => IrlError::Config(other.to_string()),
    }
}

fn parse_expert(v: &str) -> Result<ExpertMode> {
    let mut toks = v.split_whitespace();
    match (toks.next(), toks.next(), toks.next()) {
        (Some("greedy"), None, None) => Ok(ExpertMode::Greedy),
        (Some("boltzmann"), Some(t), None) => match t.parse::<f64>() {
            Ok(temperature) if temperature > 0.0 && temperature.is_finite() => {
                Ok(ExpertMode::Boltzmann { temperature })
            }
            _ => Err(IrlError::Config(format!("bad expert temperature `{t}`"))),
        },
        _ => Err(IrlError::Config(format!(
            "expert must be `greedy` or `boltzmann <temperature>`, got `{v}`"
        ))),
    }
}

impl ExperimentConfig {
    /// Defaults for `env`, then every key in `raw`.
    pub fn resolve(raw: &RawConfig) -> Result<Self> {
        let env = raw
            .get("env")
            .ok_or_else(|| IrlError::Config("missing `env`".into()))?
            .to_string();
        let spec = lookup_env(&env).map_err(config_err)?;
        let sailing = spec.is_sailing();
        let scale: Scale = value(raw, "scale")?.unwrap_or_default();
        let algorithm: Algorithm = match raw.get("algorithm") {
            Some(v) => v.parse().map_err(config_err)?,
            None => Algorithm::Girl,
        };
        let estimator: EstimatorKind = match raw.get("estimator") {
            Some(v) => v.parse().map_err(config_err)?,
            None => EstimatorKind::Fp,
        };

        let mut irl = IrlConfig::new(algorithm, estimator);
        irl.temperature = if sailing { SAILING_TEMPERATURE } else { GRID_TEMPERATURE };
        if sailing {
            irl.step_size = SAILING_STEP_SIZE;
            irl.backtracking = true;
        }
        if let Some(v) = value(raw, "temperature")? {
            irl.temperature = v;
        }
        if let Some(v) = value(raw, "step_size")? {
            irl.step_size = v;
        }
        if let Some(v) = value(raw, "iterations")? {
            irl.n_iterations = v;
        }
        if let Some(v) = raw.get("constraint") {
            irl.constraint_mode = v.parse::<ConstraintMode>().map_err(config_err)?;
        }
        if let Some(v) = value(raw, "seed")? {
            irl.seed = v;
        }
        if let Some(v) = flag(raw, "backtracking")? {
            irl.backtracking = v;
        }
        if let Some(v) = value(raw, "vi_tol")? {
            irl.vi_tol = v;
        }
        if let Some(v) = value(raw, "fp_tol")? {
            irl.estimator.fp_tol = v;
        }
        if let Some(v) = raw.get("fp1_mode") {
            irl.estimator.fp1_mode = match v {
                "one-sweep" => Fp1Mode::OneSweep,
                "features-only" => Fp1Mode::FeaturesOnly,
                other => return Err(IrlError::Config(format!("unknown fp1_mode `{other}`"))),
            };
        }
        irl.validate().map_err(config_err)?;

        let n_traj = value(raw, "n_traj")?.unwrap_or(match (sailing, scale) {
            (false, _) => GRID_TRAJECTORIES,
            (true, Scale::Desk) => SAILING_TRAJECTORIES_DESK,
            (true, Scale::Paper) => SAILING_TRAJECTORIES_PAPER,
        });
        let horizon = value(raw, "horizon")?.unwrap_or_else(|| default_horizon(spec.discount()));
        let expert = raw.get("expert").map(parse_expert).transpose()?.unwrap_or(ExpertMode::Greedy);
        let n_repeats = value(raw, "repeats")?.unwrap_or(DEFAULT_REPEATS);
        let out = raw.get("out").map(PathBuf::from);
        let record_timing = flag(raw, "record_timing")?.unwrap_or(true);

        let cfg = ExperimentConfig {
            env,
            irl,
            n_traj,
            horizon,
            expert,
            n_repeats,
            out,
            scale,
            record_timing,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_repeats == 0 {
            return Err(IrlError::Config("`repeats` must be at least 1".into()));
        }
        if self.n_traj == 0 || self.horizon == 0 {
            return Err(IrlError::Config("`n_traj` and `horizon` must be positive".into()));
        }
        self.irl.validate().map_err(config_err)
    }

    /// A config with defaults for `env`.
    pub fn for_env(env: &str, algorithm: Algorithm, estimator: EstimatorKind) -> Result<Self> {
        let mut raw = RawConfig::default();
        raw.set("env", env)?;
        raw.set("algorithm", algorithm.to_string())?;
        raw.set("estimator", estimator.to_string())?;
        ExperimentConfig::resolve(&raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_defaults() {
        let cfg = ExperimentConfig::for_env("narrow-passage-2x2", Algorithm::Pm, EstimatorKind::Ia).unwrap();
        assert_eq!(cfg.n_traj, 200);
        assert_eq!(cfg.horizon, 135);
        assert_eq!(cfg.irl.temperature, 0.1);
        assert_eq!(cfg.n_repeats, 10);
        assert_eq!(cfg.expert, ExpertMode::Greedy);
        assert!(cfg.record_timing);
    }

    #[test]
    fn sailing_scale_sets_trajectories() {
        let mut raw = parse_config_text("env = sailing-small\n").unwrap();
        assert_eq!(ExperimentConfig::resolve(&raw).unwrap().n_traj, 512);
        raw.set("scale", "paper").unwrap();
        let cfg = ExperimentConfig::resolve(&raw).unwrap();
        assert_eq!(cfg.n_traj, 5120);
        assert_eq!(cfg.irl.temperature, 0.005);
        assert!(cfg.irl.backtracking);
    }

    #[test]
    fn parses_comments_and_overrides() {
        let text = "# header\nenv = paths-10x10 # trailing\n\nalgorithm = mwal\niterations = 7\nexpert = boltzmann 0.5\nrecord_timing = false\n";
        let mut raw = parse_config_text(text).unwrap();
        raw.set("iterations", "3").unwrap();
        let cfg = ExperimentConfig::resolve(&raw).unwrap();
        assert_eq!(cfg.irl.algorithm, Algorithm::Mwal);
        assert_eq!(cfg.irl.n_iterations, 3);
        assert_eq!(cfg.expert, ExpertMode::Boltzmann { temperature: 0.5 });
        assert!(!cfg.record_timing);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse_config_text("env narrow"), Err(IrlError::Parse { line: 1, .. })));
        assert!(parse_config_text("colour = red").is_err());
        assert!(parse_config_text("seed = 1\nseed = 2").is_err());
        let raw = parse_config_text("seed = 1").unwrap();
        assert!(matches!(ExperimentConfig::resolve(&raw), Err(IrlError::Config(_))));
        for bad in ["env = nowhere", "env = paths-10x10\nrepeats = 0", "env = paths-10x10\nstep_size = -1"] {
            let raw = parse_config_text(bad).unwrap();
            assert!(matches!(ExperimentConfig::resolve(&raw), Err(IrlError::Config(_))), "{bad}");
        }
    }
}
