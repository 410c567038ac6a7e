//! Estimation strategies behind a common trait, registered by name and
//! selected at runtime.
//!
//! Three builtin strategies: `central` (DP-Thresholding), `local`
//! (LDP-Thresholding) and `naive` (unthresholded perturbation baseline).
//! The registry is open: external strategies implementing
//! [`CovarianceEstimator`] can be registered alongside the builtins.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::Result;
use crate::estimator::{
    dp_thresholding_stages, empirical_covariance, perturb_covariance, EstimatorConfig, Mode,
};
use crate::ldp::ldp_thresholding_stages;
use crate::matrix::{SampleSet, SymMatrix};
use crate::mechanism::{central_noise_scale, rng_from_seed, PrivacyBudget};

/// A strategy's output: the final estimate plus, for thresholding
/// pipelines, the pre-projection matrix (used by per-trial invariant
/// checks).
#[derive(Debug, Clone)]
pub struct Estimate {
    pub output: SymMatrix,
    pub thresholded: Option<SymMatrix>,
}

/// A covariance estimation strategy.
///
/// `seed` is the root of all randomness the strategy consumes; equal
/// inputs and seeds must produce identical outputs.
pub trait CovarianceEstimator: Send + Sync {
    fn name(&self) -> &'static str;

    fn estimate(
        &self,
        data: &SampleSet,
        budget: &PrivacyBudget,
        cfg: &EstimatorConfig,
        seed: u64,
    ) -> Result<Estimate>;
}

/// Central-model DP-Thresholding.
pub struct CentralThresholding;

impl CovarianceEstimator for CentralThresholding {
    fn name(&self) -> &'static str {
        "central"
    }

    fn estimate(
        &self,
        data: &SampleSet,
        budget: &PrivacyBudget,
        cfg: &EstimatorConfig,
        seed: u64,
    ) -> Result<Estimate> {
        let mut rng = rng_from_seed(seed);
        let stages = dp_thresholding_stages(data, budget, cfg, &mut rng)?;
        Ok(Estimate {
            output: stages.estimate,
            thresholded: Some(stages.thresholded),
        })
    }
}

/// Local-model LDP-Thresholding.
pub struct LocalThresholding;

impl CovarianceEstimator for LocalThresholding {
    fn name(&self) -> &'static str {
        "local"
    }

    fn estimate(
        &self,
        data: &SampleSet,
        budget: &PrivacyBudget,
        cfg: &EstimatorConfig,
        seed: u64,
    ) -> Result<Estimate> {
        let stages = ldp_thresholding_stages(data, budget, cfg, seed)?;
        Ok(Estimate {
            output: stages.estimate,
            thresholded: Some(stages.thresholded),
        })
    }
}

/// Perturbed empirical covariance with no post-processing.
pub struct NaivePerturbation;

impl CovarianceEstimator for NaivePerturbation {
    fn name(&self) -> &'static str {
        "naive"
    }

    fn estimate(
        &self,
        data: &SampleSet,
        budget: &PrivacyBudget,
        cfg: &EstimatorConfig,
        seed: u64,
    ) -> Result<Estimate> {
        cfg.validate()?;
        let scale = cfg.resolve_scale(central_noise_scale(data.n(), budget)?)?;
        let mut rng = rng_from_seed(seed);
        let output = perturb_covariance(&empirical_covariance(data), scale, &mut rng);
        Ok(Estimate {
            output,
            thresholded: None,
        })
    }
}

/// Name-keyed registry of estimation strategies.
pub struct EstimatorRegistry {
    entries: BTreeMap<&'static str, Arc<dyn CovarianceEstimator>>,
}

impl EstimatorRegistry {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// Registry preloaded with the builtin strategies.
    pub fn builtin() -> Self {
        let mut reg = Self::new();
        reg.register(Arc::new(CentralThresholding));
        reg.register(Arc::new(LocalThresholding));
        reg.register(Arc::new(NaivePerturbation));
        reg
    }

    /// Registers a strategy under its name, returning any displaced entry.
    pub fn register(
        &mut self,
        estimator: Arc<dyn CovarianceEstimator>,
    ) -> Option<Arc<dyn CovarianceEstimator>> {
        self.entries.insert(estimator.name(), estimator)
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn CovarianceEstimator>> {
        self.entries.get(name).cloned()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    /// The estimator mode a builtin strategy expects; defaults to central
    /// for externally registered names.
    pub fn mode_for(name: &str) -> Mode {
        if name == "local" {
            Mode::Local
        } else {
            Mode::Central
        }
    }
}

impl Default for EstimatorRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::dp_thresholding;
    use crate::ldp::ldp_thresholding;
    use crate::mechanism::derive_seed;
    use rand::Rng as _;

    fn sample_data(seed: u64) -> SampleSet {
        let mut rng = rng_from_seed(seed);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..4).map(|_| rng.random_range(-0.4..0.4)).collect())
            .collect();
        SampleSet::from_rows(&rows).unwrap()
    }

    #[test]
    fn builtin_names_are_sorted_and_complete() {
        let reg = EstimatorRegistry::builtin();
        assert_eq!(reg.names(), vec!["central", "local", "naive"]);
        assert!(reg.get("central").is_some());
        assert!(reg.get("banded").is_none());
    }

    #[test]
    fn registration_is_open() {
        struct Echo;
        impl CovarianceEstimator for Echo {
            fn name(&self) -> &'static str {
                "echo"
            }
            fn estimate(
                &self,
                data: &SampleSet,
                _budget: &PrivacyBudget,
                _cfg: &EstimatorConfig,
                _seed: u64,
            ) -> Result<Estimate> {
                Ok(Estimate {
                    output: empirical_covariance(data),
                    thresholded: None,
                })
            }
        }
        let mut reg = EstimatorRegistry::builtin();
        assert!(reg.register(Arc::new(Echo)).is_none());
        assert_eq!(reg.names().len(), 4);
        let data = sample_data(1);
        let budget = PrivacyBudget::new(1.0, 0.5).unwrap();
        let out = reg
            .get("echo")
            .unwrap()
            .estimate(&data, &budget, &EstimatorConfig::default(), 0)
            .unwrap();
        assert_eq!(out.output, empirical_covariance(&data));
    }

    #[test]
    fn strategies_match_the_pipeline_functions() {
        let data = sample_data(5);
        let budget = PrivacyBudget::new(1.0, 0.05).unwrap();
        let seed = derive_seed(12, 3);

        let central_cfg = EstimatorConfig::default();
        let via_trait = CentralThresholding
            .estimate(&data, &budget, &central_cfg, seed)
            .unwrap();
        let direct =
            dp_thresholding(&data, &budget, &central_cfg, &mut rng_from_seed(seed)).unwrap();
        assert_eq!(via_trait.output, direct);
        assert!(via_trait.thresholded.is_some());

        let local_cfg = EstimatorConfig::default().with_mode(Mode::Local);
        let via_trait = LocalThresholding
            .estimate(&data, &budget, &local_cfg, seed)
            .unwrap();
        let direct = ldp_thresholding(&data, &budget, &local_cfg, seed).unwrap();
        assert_eq!(via_trait.output, direct);
    }

    #[test]
    fn central_strategy_rejects_local_mode_config() {
        let data = sample_data(2);
        let budget = PrivacyBudget::new(1.0, 0.5).unwrap();
        let cfg = EstimatorConfig::default().with_mode(Mode::Local);
        assert!(CentralThresholding.estimate(&data, &budget, &cfg, 7).is_err());
    }

    #[test]
    fn mode_mapping_for_builtins() {
        assert_eq!(EstimatorRegistry::mode_for("local"), Mode::Local);
        assert_eq!(EstimatorRegistry::mode_for("central"), Mode::Central);
        assert_eq!(EstimatorRegistry::mode_for("naive"), Mode::Central);
    }
}
