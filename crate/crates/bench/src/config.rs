//! Experiment configuration: setting presets, a flat TOML config file,
//! and CLI flag overrides.
//!
//! Resolution order: builtin defaults, then the selected setting's
//! presets, then the config file, then flags. The three named settings
//! sweep exactly one of sr / p / epsilon, with values from the benchmark
//! protocol; `custom` runs a single parameter combination over the n grid.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use dpcov::datagen::{DEFAULT_LAMBDA, DEFAULT_SCALE_DIVISOR};
use dpcov::DiagonalPolicy;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse: {0}")]
    Toml(String),

    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    SparsitySweep,
    DimensionSweep,
    EpsilonSweep,
    Custom,
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Setting::SparsitySweep => "sparsity-sweep",
            Setting::DimensionSweep => "dimension-sweep",
            Setting::EpsilonSweep => "epsilon-sweep",
            Setting::Custom => "custom",
        };
        f.write_str(s)
    }
}

impl FromStr for Setting {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "sparsity-sweep" => Ok(Setting::SparsitySweep),
            "dimension-sweep" => Ok(Setting::DimensionSweep),
            "epsilon-sweep" => Ok(Setting::EpsilonSweep),
            "custom" => Ok(Setting::Custom),
            other => Err(ConfigError::Invalid(format!(
                "unknown setting {other:?} (expected sparsity-sweep, dimension-sweep, epsilon-sweep or custom)"
            ))),
        }
    }
}

/// How each grid point's delta is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaRule {
    /// delta = 1/n for the grid point's n.
    OneOverN,
    Fixed(f64),
}

impl DeltaRule {
    pub fn delta_for(&self, n: usize) -> f64 {
        match self {
            DeltaRule::OneOverN => 1.0 / n as f64,
            DeltaRule::Fixed(d) => *d,
        }
    }
}

/// A parameter that is either a single value or a swept list.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Sweep<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Copy> Sweep<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            Sweep::One(v) => vec![*v],
            Sweep::Many(vs) => vs.clone(),
        }
    }

    pub fn is_list(&self) -> bool {
        matches!(self, Sweep::Many(_))
    }
}

/// One point of the expanded experiment grid.
#[derive(Debug, Clone, Copy)]
pub struct GridPoint {
    pub index: usize,
    pub sr: f64,
    pub p: usize,
    pub epsilon: f64,
    pub n: usize,
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub setting: Setting,
    pub algorithm: String,
    pub p: Sweep<usize>,
    pub sr: Sweep<f64>,
    pub epsilon: Sweep<f64>,
    pub delta_rule: DeltaRule,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub gamma: f64,
    pub master_seed: u64,
    pub diagonal_policy: DiagonalPolicy,
    pub clip_norm: bool,
    pub lambda: f64,
    pub scale_divisor: f64,
    pub sensitivity_multiplier: f64,
    /// Test mode: force the noise scale (0 disables noise).
    pub force_sigma: Option<f64>,
    /// Test mode: force the threshold.
    pub force_threshold: Option<f64>,
    /// Worker threads for trial execution; None uses the default pool.
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));
        if self.trials == 0 {
            return invalid("trials must be >= 1".into());
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return invalid(format!("gamma must be positive, got {}", self.gamma));
        }
        if self.n_grid.is_empty() {
            return invalid("n_grid must be nonempty".into());
        }
        if self.n_grid.contains(&0) {
            return invalid("every n in n_grid must be >= 1".into());
        }
        let ps = self.p.values();
        if ps.is_empty() || ps.contains(&0) {
            return invalid("p values must be nonempty and >= 1".into());
        }
        let srs = self.sr.values();
        if srs.is_empty() || srs.iter().any(|&s| !(0.0..=1.0).contains(&s)) {
            return invalid("sr values must lie in [0, 1]".into());
        }
        let epss = self.epsilon.values();
        if epss.is_empty() || epss.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
            return invalid("epsilon values must be positive".into());
        }
        if let DeltaRule::Fixed(d) = self.delta_rule {
            if !(d.is_finite() && d > 0.0 && d <= 1.0) {
                return invalid(format!("delta must lie in (0, 1], got {d}"));
            }
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return invalid(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.scale_divisor.is_finite() && self.scale_divisor > 0.0) {
            return invalid(format!("c must be positive, got {}", self.scale_divisor));
        }
        if !(self.sensitivity_multiplier.is_finite() && self.sensitivity_multiplier > 0.0) {
            return invalid("sensitivity multiplier must be positive".into());
        }
        for (name, v) in [("force-sigma", self.force_sigma), ("force-threshold", self.force_threshold)] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return invalid(format!("{name} must be nonnegative, got {v}"));
                }
            }
        }

        let lists = [self.p.is_list(), self.sr.is_list(), self.epsilon.is_list()];
        let list_count = lists.iter().filter(|&&b| b).count();
        match self.setting {
            Setting::SparsitySweep => {
                if !(self.sr.is_list() && list_count == 1) {
                    return invalid("sparsity-sweep must sweep sr and only sr".into());
                }
            }
            Setting::DimensionSweep => {
                if !(self.p.is_list() && list_count == 1) {
                    return invalid("dimension-sweep must sweep p and only p".into());
                }
            }
            Setting::EpsilonSweep => {
                if !(self.epsilon.is_list() && list_count == 1) {
                    return invalid("epsilon-sweep must sweep epsilon and only epsilon".into());
                }
            }
            Setting::Custom => {
                if list_count > 1 {
                    return invalid("custom setting allows at most one swept parameter".into());
                }
            }
        }
        Ok(())
    }

    /// The swept parameter's name and printable values, if any.
    pub fn swept_param(&self) -> Option<(&'static str, Vec<String>)> {
        if self.sr.is_list() {
            Some(("sr", self.sr.values().iter().map(|v| format!("{v}")).collect()))
        } else if self.p.is_list() {
            Some(("p", self.p.values().iter().map(|v| format!("{v}")).collect()))
        } else if self.epsilon.is_list() {
            Some((
                "epsilon",
                self.epsilon.values().iter().map(|v| format!("{v}")).collect(),
            ))
        } else {
            None
        }
    }

    /// Expands the swept parameter against the n grid, swept values outer,
    /// n inner. Grid indices are stable across runs.
    pub fn grid(&self) -> Vec<GridPoint> {
        let combos: Vec<(f64, usize, f64)> = if self.sr.is_list() {
            let p = self.p.values()[0];
            let eps = self.epsilon.values()[0];
            self.sr.values().iter().map(|&sr| (sr, p, eps)).collect()
        } else if self.p.is_list() {
            let sr = self.sr.values()[0];
            let eps = self.epsilon.values()[0];
            self.p.values().iter().map(|&p| (sr, p, eps)).collect()
        } else if self.epsilon.is_list() {
            let sr = self.sr.values()[0];
            let p = self.p.values()[0];
            self.epsilon.values().iter().map(|&eps| (sr, p, eps)).collect()
        } else {
            vec![(self.sr.values()[0], self.p.values()[0], self.epsilon.values()[0])]
        };
        let mut grid = Vec::with_capacity(combos.len() * self.n_grid.len());
        for (sr, p, epsilon) in combos {
            for &n in &self.n_grid {
                grid.push(GridPoint {
                    index: grid.len(),
                    sr,
                    p,
                    epsilon,
                    n,
                });
            }
        }
        grid
    }
}

/// A partially specified configuration, as read from a file or flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub setting: Option<String>,
    pub algorithm: Option<String>,
    pub p: Option<Sweep<usize>>,
    pub sr: Option<Sweep<f64>>,
    pub epsilon: Option<Sweep<f64>>,
    /// Fixed delta; mutually exclusive with `delta_rule`.
    pub delta: Option<f64>,
    /// Only "one-over-n" is recognized.
    pub delta_rule: Option<String>,
    pub n_grid: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub gamma: Option<f64>,
    pub master_seed: Option<u64>,
    pub diagonal_policy: Option<String>,
    pub clip_norm: Option<bool>,
    pub lambda: Option<f64>,
    pub scale_divisor: Option<f64>,
    pub sensitivity_multiplier: Option<f64>,
    pub force_sigma: Option<f64>,
    pub force_threshold: Option<f64>,
    pub workers: Option<usize>,
}

impl PartialConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError::Toml(e.to_string()))
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Overlays `self` on top of `base`; present fields win.
    pub fn merged_over(self, base: PartialConfig) -> PartialConfig {
        PartialConfig {
            setting: self.setting.or(base.setting),
            algorithm: self.algorithm.or(base.algorithm),
            p: self.p.or(base.p),
            sr: self.sr.or(base.sr),
            epsilon: self.epsilon.or(base.epsilon),
            delta: self.delta.or(base.delta),
            delta_rule: self.delta_rule.or(base.delta_rule),
            n_grid: self.n_grid.or(base.n_grid),
            trials: self.trials.or(base.trials),
            gamma: self.gamma.or(base.gamma),
            master_seed: self.master_seed.or(base.master_seed),
            diagonal_policy: self.diagonal_policy.or(base.diagonal_policy),
            clip_norm: self.clip_norm.or(base.clip_norm),
            lambda: self.lambda.or(base.lambda),
            scale_divisor: self.scale_divisor.or(base.scale_divisor),
            sensitivity_multiplier: self.sensitivity_multiplier.or(base.sensitivity_multiplier),
            force_sigma: self.force_sigma.or(base.force_sigma),
            force_threshold: self.force_threshold.or(base.force_threshold),
            workers: self.workers.or(base.workers),
        }
    }

    /// Fills unset fields from the setting's presets and the builtin
    /// defaults, then validates.
    pub fn resolve(self) -> Result<ExperimentConfig, ConfigError> {
        let setting = match &self.setting {
            Some(s) => s.parse::<Setting>()?,
            None => Setting::Custom,
        };

        // Benchmark presets for the swept parameter and its companions.
        let (preset_p, preset_sr, preset_eps): (Sweep<usize>, Sweep<f64>, Sweep<f64>) =
            match setting {
                Setting::SparsitySweep => (
                    Sweep::One(100),
                    Sweep::Many(vec![0.1, 0.2, 0.3, 0.5]),
                    Sweep::One(1.0),
                ),
                Setting::DimensionSweep => (
                    Sweep::Many(vec![50, 100, 200, 500]),
                    Sweep::One(0.2),
                    Sweep::One(1.0),
                ),
                Setting::EpsilonSweep => (
                    Sweep::One(200),
                    Sweep::One(0.2),
                    Sweep::Many(vec![0.1, 0.5, 1.0, 2.0]),
                ),
                Setting::Custom => (Sweep::One(100), Sweep::One(0.2), Sweep::One(1.0)),
            };

        let delta_rule = match (self.delta, self.delta_rule.as_deref()) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid(
                    "delta and delta_rule are mutually exclusive".into(),
                ))
            }
            (Some(d), None) => DeltaRule::Fixed(d),
            (None, Some("one-over-n")) => DeltaRule::OneOverN,
            (None, Some(other)) => {
                return Err(ConfigError::Invalid(format!(
                    "unknown delta rule {other:?} (expected \"one-over-n\" or a fixed delta)"
                )))
            }
            (None, None) => DeltaRule::OneOverN,
        };

        let diagonal_policy = match self.diagonal_policy.as_deref() {
            None | Some("threshold-all") => DiagonalPolicy::ThresholdAll,
            Some("exempt-diagonal") => DiagonalPolicy::ExemptDiagonal,
            Some(other) => {
                return Err(ConfigError::Invalid(format!(
                    "unknown diagonal policy {other:?} (expected threshold-all or exempt-diagonal)"
                )))
            }
        };

        let cfg = ExperimentConfig {
            setting,
            algorithm: self.algorithm.unwrap_or_else(|| "central".into()),
            p: self.p.unwrap_or(preset_p),
            sr: self.sr.unwrap_or(preset_sr),
            epsilon: self.epsilon.unwrap_or(preset_eps),
            delta_rule,
            n_grid: self.n_grid.unwrap_or_else(|| vec![250, 500, 1000, 2000, 4000]),
            trials: self.trials.unwrap_or(20),
            gamma: self.gamma.unwrap_or(0.5),
            master_seed: self.master_seed.unwrap_or(1),
            diagonal_policy,
            clip_norm: self.clip_norm.unwrap_or(false),
            lambda: self.lambda.unwrap_or(DEFAULT_LAMBDA),
            scale_divisor: self.scale_divisor.unwrap_or(DEFAULT_SCALE_DIVISOR),
            sensitivity_multiplier: self.sensitivity_multiplier.unwrap_or(1.0),
            force_sigma: self.force_sigma,
            force_threshold: self.force_threshold,
            workers: self.workers,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_to_custom_single_point() {
        let cfg = PartialConfig::default().resolve().unwrap();
        assert_eq!(cfg.setting, Setting::Custom);
        assert_eq!(cfg.algorithm, "central");
        assert_eq!(cfg.trials, 20);
        assert_eq!(cfg.n_grid, vec![250, 500, 1000, 2000, 4000]);
        assert_eq!(cfg.grid().len(), 5);
        assert!(cfg.swept_param().is_none());
    }

    fn with_setting(setting: &str) -> PartialConfig {
        PartialConfig {
            setting: Some(setting.into()),
            ..Default::default()
        }
    }

    #[test]
    fn sparsity_preset_matches_protocol() {
        let cfg = with_setting("sparsity-sweep").resolve().unwrap();
        assert_eq!(cfg.sr, Sweep::Many(vec![0.1, 0.2, 0.3, 0.5]));
        assert_eq!(cfg.p, Sweep::One(100));
        assert_eq!(cfg.epsilon, Sweep::One(1.0));
        assert_eq!(cfg.delta_rule, DeltaRule::OneOverN);
        // 4 sr values x 5 n values.
        assert_eq!(cfg.grid().len(), 20);
        let (name, values) = cfg.swept_param().unwrap();
        assert_eq!(name, "sr");
        assert_eq!(values, vec!["0.1", "0.2", "0.3", "0.5"]);
    }

    #[test]
    fn dimension_and_epsilon_presets() {
        let cfg = with_setting("dimension-sweep").resolve().unwrap();
        assert_eq!(cfg.p, Sweep::Many(vec![50, 100, 200, 500]));

        let cfg = with_setting("epsilon-sweep").resolve().unwrap();
        assert_eq!(cfg.epsilon, Sweep::Many(vec![0.1, 0.5, 1.0, 2.0]));
        assert_eq!(cfg.p, Sweep::One(200));
    }

    #[test]
    fn toml_file_and_flag_overlay() {
        let file = PartialConfig::from_toml_str(
            "setting = \"sparsity-sweep\"\ntrials = 5\nmaster_seed = 7\nn_grid = [100, 200]\n",
        )
        .unwrap();
        let flags = PartialConfig {
            trials: Some(9),
            ..Default::default()
        };
        let cfg = flags.merged_over(file).resolve().unwrap();
        assert_eq!(cfg.trials, 9);
        assert_eq!(cfg.master_seed, 7);
        assert_eq!(cfg.n_grid, vec![100, 200]);
        assert_eq!(cfg.setting, Setting::SparsitySweep);
    }

    #[test]
    fn toml_accepts_lists_and_scalars() {
        let p = PartialConfig::from_toml_str("p = [5, 10]\nsr = 0.3\n").unwrap();
        assert_eq!(p.p, Some(Sweep::Many(vec![5, 10])));
        assert_eq!(p.sr, Some(Sweep::One(0.3)));
        assert!(PartialConfig::from_toml_str("unknown_key = 1\n").is_err());
    }

    #[test]
    fn named_setting_rejects_wrong_sweep_shape() {
        let partial = PartialConfig {
            sr: Some(Sweep::One(0.2)),
            ..with_setting("sparsity-sweep")
        };
        assert!(partial.resolve().is_err());

        let partial = PartialConfig {
            p: Some(Sweep::Many(vec![10, 20])),
            ..with_setting("sparsity-sweep")
        };
        assert!(partial.resolve().is_err());
    }

    #[test]
    fn validation_catches_bad_values() {
        for toml in [
            "sr = 1.5",
            "epsilon = -1.0",
            "trials = 0",
            "gamma = 0.0",
            "n_grid = []",
            "delta = 0.0",
            "delta = 2.0",
            "diagonal_policy = \"sometimes\"",
        ] {
            let partial = PartialConfig::from_toml_str(toml).unwrap();
            assert!(partial.resolve().is_err(), "{toml:?} should not resolve");
        }
        assert!(PartialConfig::from_toml_str(
            "delta = 0.1\ndelta_rule = \"one-over-n\"\n"
        )
        .unwrap()
        .resolve()
        .is_err());
    }

    #[test]
    fn delta_rule_values() {
        assert_eq!(DeltaRule::OneOverN.delta_for(400), 1.0 / 400.0);
        assert_eq!(DeltaRule::Fixed(0.01).delta_for(400), 0.01);
    }

    #[test]
    fn grid_orders_swept_outer_n_inner() {
        let partial = PartialConfig {
            n_grid: Some(vec![10, 20]),
            ..with_setting("epsilon-sweep")
        };
        let cfg = partial.resolve().unwrap();
        let grid = cfg.grid();
        assert_eq!(grid.len(), 8);
        assert_eq!((grid[0].epsilon, grid[0].n), (0.1, 10));
        assert_eq!((grid[1].epsilon, grid[1].n), (0.1, 20));
        assert_eq!((grid[2].epsilon, grid[2].n), (0.5, 10));
        assert!(grid.iter().enumerate().all(|(i, g)| g.index == i));
    }
}
