//! Local-model pipeline: per-record symmetric perturbation, server-side
//! aggregation, thresholding with the local threshold, PSD projection.
//!
//! The one-round protocol is simulated in process: each record's
//! perturbation plays the player, the aggregation plays the server. Player
//! `i` draws from its own stream derived from `(master_seed, i)`, so the
//! result is reproducible under any execution order. Aggregation sums in
//! index order to keep runs bit-reproducible.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::estimator::{hard_threshold, psd_project, threshold_value, EstimatorConfig, Mode};
use crate::matrix::{SampleSet, SymMatrix};
use crate::mechanism::{
    derive_seed, local_noise_scale, rng_from_seed, sample_symmetric_noise, NoiseScale,
    PrivacyBudget,
};

/// One player's privatized contribution `x x^T + z`.
#[derive(Debug, Clone)]
pub struct NoisyRecord {
    matrix: SymMatrix,
}

impl NoisyRecord {
    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> SymMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// Privatizes one record: `x x^T + z` with `z` a symmetric Gaussian noise
/// matrix at the given scale.
pub fn perturb_record<R: Rng + ?Sized>(
    x: &[f64],
    scale: NoiseScale,
    rng: &mut R,
) -> Result<NoisyRecord> {
    if x.is_empty() {
        return Err(Error::EmptyInput("record must have p >= 1"));
    }
    let p = x.len();
    let noise = sample_symmetric_noise(p, scale, rng)?;
    let mut m = noise.into_matrix();
    for a in 0..p {
        for b in a..p {
            let v = x[a] * x[b] + m[(a, b)];
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    Ok(NoisyRecord {
        matrix: SymMatrix::new_unchecked(m),
    })
}

/// Entrywise arithmetic mean of the records, summed in index order.
pub fn aggregate(records: &[NoisyRecord]) -> Result<SymMatrix> {
    let first = records
        .first()
        .ok_or(Error::EmptyInput("aggregate requires at least one record"))?;
    let p = first.dim();
    let mut acc: DMatrix<f64> = DMatrix::zeros(p, p);
    for record in records {
        if record.dim() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: record.dim(),
            });
        }
        let m = record.matrix().matrix();
        for a in 0..p {
            for b in a..p {
                acc[(a, b)] += m[(a, b)];
            }
        }
    }
    let n = records.len() as f64;
    let mut out = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let v = acc[(a, b)] / n;
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    Ok(SymMatrix::new_unchecked(out))
}

/// Intermediate matrices of a local run.
#[derive(Debug, Clone)]
pub struct LocalStages {
    /// Aggregated noisy covariance before thresholding.
    pub aggregated: SymMatrix,
    pub thresholded: SymMatrix,
    pub estimate: SymMatrix,
}

/// Local-model pipeline, returning every stage.
///
/// Player `i`'s noise stream is seeded with `derive_seed(master_seed, i)`.
pub fn ldp_thresholding_stages(
    data: &SampleSet,
    budget: &PrivacyBudget,
    cfg: &EstimatorConfig,
    master_seed: u64,
) -> Result<LocalStages> {
    if cfg.mode != Mode::Local {
        return Err(Error::ModeMismatch {
            expected: Mode::Local.as_str(),
            got: cfg.mode.as_str(),
        });
    }
    cfg.validate()?;
    let scale = cfg.resolve_scale(local_noise_scale(budget)?)?;
    let n = data.n();
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = rng_from_seed(derive_seed(master_seed, i as u64));
        records.push(perturb_record(&data.row(i), scale, &mut rng)?);
    }
    let aggregated = aggregate(&records)?;
    let t = match cfg.threshold_override {
        Some(t) => t,
        None => threshold_value(data.p(), n, budget, cfg)?,
    };
    let thresholded = hard_threshold(&aggregated, t, cfg.diagonal_policy);
    let estimate = psd_project(&thresholded)?;
    Ok(LocalStages {
        aggregated,
        thresholded,
        estimate,
    })
}

/// Local-model DP estimator: perturb each record, aggregate, threshold,
/// project.
pub fn ldp_thresholding(
    data: &SampleSet,
    budget: &PrivacyBudget,
    cfg: &EstimatorConfig,
    master_seed: u64,
) -> Result<SymMatrix> {
    Ok(ldp_thresholding_stages(data, budget, cfg, master_seed)?.estimate)
}
