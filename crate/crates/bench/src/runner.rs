//! Deterministic trial execution.
//!
//! Every trial owns a seed derived from (master seed, grid index, trial
//! index), so scheduling order and worker count cannot affect results.
//! Each trial generates a fresh ground truth, samples data, runs the
//! selected strategy and records the three relative errors; numeric
//! failures mark the trial failed and the run continues.

use std::time::Instant;

use dpcov::datagen::{generate_model, sample_gaussian};
use dpcov::mechanism::{derive_seed, rng_from_seed};
use dpcov::metrics::{operator_norm_1, operator_norm_2, relative_error, Norm};
use dpcov::{EstimatorConfig, EstimatorRegistry, PrivacyBudget};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ExperimentConfig, GridPoint};

/// PSD floor for thresholding estimators' outputs.
pub const PSD_FLOOR: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("unknown algorithm {0:?}; registered: {1:?}")]
    UnknownAlgorithm(String, Vec<&'static str>),

    #[error("worker pool: {0}")]
    Pool(String),
}

/// One trial's parameters and results. `wall_time_ms` is measured, never
/// written into the deterministic outputs.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub grid_index: usize,
    pub sr: f64,
    pub p: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub n: usize,
    pub trial: usize,
    pub seed: u64,
    pub rel_err_l1: Option<f64>,
    pub rel_err_l2: Option<f64>,
    pub rel_err_linf: Option<f64>,
    pub min_eigenvalue_of_output: Option<f64>,
    pub wall_time_ms: f64,
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// Per-grid-point aggregate over completed trials.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub sr: f64,
    pub p: usize,
    pub epsilon: f64,
    pub n: usize,
    pub completed: usize,
    pub failed: usize,
    pub mean_rel_err_l1: Option<f64>,
    pub std_rel_err_l1: Option<f64>,
    pub mean_rel_err_l2: Option<f64>,
    pub std_rel_err_l2: Option<f64>,
    pub mean_rel_err_linf: Option<f64>,
    pub std_rel_err_linf: Option<f64>,
}

#[derive(Debug)]
pub struct RunResult {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
    /// Per-trial invariant violations (empty on a healthy run).
    pub invariant_violations: Vec<String>,
}

impl RunResult {
    pub fn failed_trials(&self) -> usize {
        self.records.iter().filter(|r| r.failed()).count()
    }
}

/// Runs the full grid. Records are ordered by (grid index, trial index)
/// regardless of how trials were scheduled.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    registry: &EstimatorRegistry,
) -> Result<RunResult, RunError> {
    let estimator = registry
        .get(&cfg.algorithm)
        .ok_or_else(|| RunError::UnknownAlgorithm(cfg.algorithm.clone(), registry.names()))?;

    for eps in cfg.epsilon.values() {
        if eps > 1.0 {
            log::warn!("epsilon = {eps} exceeds the calibration's nominal range (0, 1]");
        }
    }

    let grid = cfg.grid();
    let jobs: Vec<(GridPoint, usize)> = grid
        .iter()
        .flat_map(|gp| (0..cfg.trials).map(move |t| (*gp, t)))
        .collect();

    let estimator = estimator.as_ref();
    let execute = || {
        jobs.par_iter()
            .map(|(gp, trial)| run_trial(cfg, estimator, gp, *trial))
            .collect::<Vec<_>>()
    };
    let outputs = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| RunError::Pool(e.to_string()))?
            .install(execute),
        None => execute(),
    };

    let mut records = Vec::with_capacity(outputs.len());
    let mut invariant_violations = Vec::new();
    for (record, violation) in outputs {
        if let Some(v) = violation {
            invariant_violations.push(v);
        }
        records.push(record);
    }
    let summary = summarize(&grid, &records);
    Ok(RunResult {
        records,
        summary,
        invariant_violations,
    })
}

fn run_trial(
    cfg: &ExperimentConfig,
    estimator: &dyn dpcov::CovarianceEstimator,
    gp: &GridPoint,
    trial: usize,
) -> (TrialRecord, Option<String>) {
    let trial_seed = derive_seed(derive_seed(cfg.master_seed, gp.index as u64), trial as u64);
    let model_seed = derive_seed(trial_seed, 0);
    let sample_seed = derive_seed(trial_seed, 1);
    let noise_seed = derive_seed(trial_seed, 2);
    let delta = cfg.delta_rule.delta_for(gp.n);

    let start = Instant::now();
    let mut violation = None;
    let outcome = (|| -> dpcov::Result<(f64, f64, f64, f64)> {
        let budget = PrivacyBudget::new(gp.epsilon, delta)?;
        let model = generate_model(gp.p, gp.sr, cfg.lambda, cfg.scale_divisor, model_seed)?;
        let mut data = sample_gaussian(&model, gp.n, &mut rng_from_seed(sample_seed))?;
        if cfg.clip_norm {
            data = data.clip_to_unit_ball();
        }
        let est_cfg = EstimatorConfig {
            gamma: cfg.gamma,
            diagonal_policy: cfg.diagonal_policy,
            mode: EstimatorRegistry::mode_for(&cfg.algorithm),
            sensitivity_multiplier: cfg.sensitivity_multiplier,
            noise_scale_override: cfg.force_sigma,
            threshold_override: cfg.force_threshold,
        };
        let estimate = estimator.estimate(&data, &budget, &est_cfg, noise_seed)?;

        let truth = model.covariance();
        let l1 = relative_error(&estimate.output, truth, Norm::L1)?;
        let l2 = relative_error(&estimate.output, truth, Norm::L2)?;
        let linf = relative_error(&estimate.output, truth, Norm::LInf)?;
        let min_eig = estimate.output.min_eigenvalue()?;

        let diff = estimate.output.matrix() - truth.matrix();
        let spectral = operator_norm_2(&diff)?;
        if spectral > operator_norm_1(&diff) + PSD_FLOOR {
            violation = Some(format!(
                "grid {} trial {trial}: spectral error {spectral} exceeds l1 error",
                gp.index
            ));
        }
        if let Some(thresholded) = &estimate.thresholded {
            let pre = operator_norm_2(&(thresholded.matrix() - truth.matrix()))?;
            if spectral > 2.0 * pre + PSD_FLOOR {
                violation = Some(format!(
                    "grid {} trial {trial}: projection error {spectral} exceeds twice the \
                     pre-projection error {pre}",
                    gp.index
                ));
            }
            if min_eig < -PSD_FLOOR {
                violation = Some(format!(
                    "grid {} trial {trial}: output min eigenvalue {min_eig} below PSD floor",
                    gp.index
                ));
            }
        }
        Ok((l1, l2, linf, min_eig))
    })();
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;

    let record = match outcome {
        Ok((l1, l2, linf, min_eig)) => TrialRecord {
            grid_index: gp.index,
            sr: gp.sr,
            p: gp.p,
            epsilon: gp.epsilon,
            delta,
            n: gp.n,
            trial,
            seed: trial_seed,
            rel_err_l1: Some(l1),
            rel_err_l2: Some(l2),
            rel_err_linf: Some(linf),
            min_eigenvalue_of_output: Some(min_eig),
            wall_time_ms,
            error: None,
        },
        Err(e) => {
            log::warn!("grid {} trial {trial} failed: {e}", gp.index);
            TrialRecord {
                grid_index: gp.index,
                sr: gp.sr,
                p: gp.p,
                epsilon: gp.epsilon,
                delta,
                n: gp.n,
                trial,
                seed: trial_seed,
                rel_err_l1: None,
                rel_err_l2: None,
                rel_err_linf: None,
                min_eigenvalue_of_output: None,
                wall_time_ms,
                error: Some(e.to_string()),
            }
        }
    };
    (record, violation)
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    };
    (Some(mean), Some(std))
}

fn summarize(grid: &[GridPoint], records: &[TrialRecord]) -> Vec<SummaryRow> {
    grid.iter()
        .map(|gp| {
            let trials: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.grid_index == gp.index)
                .collect();
            let completed: Vec<&&TrialRecord> = trials.iter().filter(|r| !r.failed()).collect();
            let collect = |f: fn(&TrialRecord) -> Option<f64>| -> Vec<f64> {
                completed.iter().filter_map(|r| f(r)).collect()
            };
            let (mean_l1, std_l1) = mean_std(&collect(|r| r.rel_err_l1));
            let (mean_l2, std_l2) = mean_std(&collect(|r| r.rel_err_l2));
            let (mean_linf, std_linf) = mean_std(&collect(|r| r.rel_err_linf));
            SummaryRow {
                sr: gp.sr,
                p: gp.p,
                epsilon: gp.epsilon,
                n: gp.n,
                completed: completed.len(),
                failed: trials.len() - completed.len(),
                mean_rel_err_l1: mean_l1,
                std_rel_err_l1: std_l1,
                mean_rel_err_l2: mean_l2,
                std_rel_err_l2: std_l2,
                mean_rel_err_linf: mean_linf,
                std_rel_err_linf: std_linf,
            }
        })
        .collect()
}
