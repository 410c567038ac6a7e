//! Central-model estimation pipeline: empirical covariance, Gaussian
//! perturbation, hard thresholding, and PSD projection via eigenvalue
//! clipping, plus the unthresholded perturbation baseline.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{symmetric_eigen, SampleSet, SymMatrix};
use crate::mechanism::{central_noise_scale, sample_symmetric_noise, NoiseScale, PrivacyBudget};

/// Whether the threshold indicator applies to diagonal entries.
///
/// `ThresholdAll` is the literal reading of the thresholding rule (the
/// indicator runs over every entry, so small variances can be zeroed);
/// `ExemptDiagonal` passes diagonal entries through unconditionally, as
/// classical covariance thresholding does.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagonalPolicy {
    ThresholdAll,
    ExemptDiagonal,
}

/// Which threshold formula the pipeline uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Central,
    Local,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Central => "central",
            Mode::Local => "local",
        }
    }
}

/// Tuning knobs shared by the central and local pipelines.
///
/// `noise_scale_override` and `threshold_override` are explicit test
/// modes: they replace the calibrated noise scale and threshold so the
/// pipelines can be driven noiselessly or with a forced cutoff.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    /// Constant multiplying the sampling term `sqrt(ln p / n)`.
    pub gamma: f64,
    pub diagonal_policy: DiagonalPolicy,
    pub mode: Mode,
    /// Multiplier applied to the calibrated noise scale (default 1.0);
    /// lets a stricter sensitivity calibration be dialed in.
    pub sensitivity_multiplier: f64,
    pub noise_scale_override: Option<f64>,
    pub threshold_override: Option<f64>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            diagonal_policy: DiagonalPolicy::ThresholdAll,
            mode: Mode::Central,
            sensitivity_multiplier: 1.0,
            noise_scale_override: None,
            threshold_override: None,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() || self.gamma <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma must be a positive real, got {}",
                self.gamma
            )));
        }
        if !self.sensitivity_multiplier.is_finite() || self.sensitivity_multiplier <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sensitivity multiplier must be a positive real, got {}",
                self.sensitivity_multiplier
            )));
        }
        if let Some(t) = self.threshold_override {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "threshold override must be nonnegative, got {t}"
                )));
            }
        }
        if let Some(s) = self.noise_scale_override {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "noise scale override must be nonnegative, got {s}"
                )));
            }
        }
        Ok(())
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    /// The noise scale the pipeline will actually use, honoring the
    /// override and the sensitivity multiplier.
    pub(crate) fn resolve_scale(&self, calibrated: NoiseScale) -> Result<NoiseScale> {
        match self.noise_scale_override {
            Some(0.0) => Ok(NoiseScale::zero()),
            Some(s) => NoiseScale::new(s),
            None => calibrated.scaled(self.sensitivity_multiplier),
        }
    }
}

/// Empirical covariance `(1/n) sum_i x_i x_i^T`.
///
/// No mean subtraction: the sampling model assumes mean-zero data. Outer
/// products are accumulated in row index order over the upper triangle and
/// mirrored, so the result is bitwise symmetric and bit-reproducible.
pub fn empirical_covariance(data: &SampleSet) -> SymMatrix {
    let n = data.n();
    let p = data.p();
    let rows = data.rows();
    let mut acc: DMatrix<f64> = DMatrix::zeros(p, p);
    for i in 0..n {
        let row = rows.row(i);
        for a in 0..p {
            let xa = row[a];
            for b in a..p {
                acc[(a, b)] += xa * row[b];
            }
        }
    }
    let n = n as f64;
    let mut out = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let v = acc[(a, b)] / n;
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    SymMatrix::new_unchecked(out)
}

/// Adds a fresh symmetric Gaussian noise matrix to `cov`.
pub fn perturb_covariance<R: Rng + ?Sized>(
    cov: &SymMatrix,
    scale: NoiseScale,
    rng: &mut R,
) -> SymMatrix {
    let noise = sample_symmetric_noise(cov.dim(), scale, rng)
        .expect("SymMatrix dimension is always >= 1");
    SymMatrix::new_unchecked(cov.matrix() + noise.matrix())
}

/// Threshold `T = gamma sqrt(ln p / n) + 4 sqrt(2 ln(1.25/delta)) sqrt(ln p) / (n eps)`;
/// in local mode the denominator of the privacy term is `sqrt(n) eps`.
pub fn threshold_value(
    p: usize,
    n: usize,
    budget: &PrivacyBudget,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    if p == 0 {
        return Err(Error::InvalidParameter("p must be >= 1".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    cfg.validate()?;
    let ln_p = (p as f64).ln();
    let log_term = (2.0 * (1.25 / budget.delta()).ln()).sqrt();
    let denom = match cfg.mode {
        Mode::Central => n as f64 * budget.epsilon(),
        Mode::Local => (n as f64).sqrt() * budget.epsilon(),
    };
    Ok(cfg.gamma * (ln_p / n as f64).sqrt() + 4.0 * log_term * ln_p.sqrt() / denom)
}

/// Zeroes every entry whose magnitude does not strictly exceed `t`.
pub fn hard_threshold(m: &SymMatrix, t: f64, policy: DiagonalPolicy) -> SymMatrix {
    debug_assert!(t >= 0.0, "threshold must be nonnegative");
    let p = m.dim();
    SymMatrix::from_upper_fn(p, |i, j| {
        let v = m.get(i, j);
        let exempt = i == j && policy == DiagonalPolicy::ExemptDiagonal;
        if exempt || v.abs() > t {
            v
        } else {
            0.0
        }
    })
}

/// Projects onto the PSD cone by clipping negative eigenvalues:
/// `sum_i max(lambda_i, 0) v_i v_i^T`. The reconstruction is
/// re-symmetrized as `(A + A^T)/2` to absorb round-off.
pub fn psd_project(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = symmetric_eigen(m.matrix())?;
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let recon = &eig.eigenvectors
        * DMatrix::from_diagonal(&clipped)
        * eig.eigenvectors.transpose();
    SymMatrix::from_matrix_symmetrized(recon)
}

/// Intermediate matrices of a thresholding run, for staged inspection.
#[derive(Debug, Clone)]
pub struct PipelineStages {
    /// Perturbed covariance before thresholding.
    pub perturbed: SymMatrix,
    /// After hard thresholding, before projection.
    pub thresholded: SymMatrix,
    /// Final PSD estimate.
    pub estimate: SymMatrix,
}

/// Central-model pipeline, returning every stage.
pub fn dp_thresholding_stages<R: Rng + ?Sized>(
    data: &SampleSet,
    budget: &PrivacyBudget,
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<PipelineStages> {
    if cfg.mode != Mode::Central {
        return Err(Error::ModeMismatch {
            expected: Mode::Central.as_str(),
            got: cfg.mode.as_str(),
        });
    }
    cfg.validate()?;
    let scale = cfg.resolve_scale(central_noise_scale(data.n(), budget)?)?;
    let cov = empirical_covariance(data);
    let perturbed = perturb_covariance(&cov, scale, rng);
    let t = match cfg.threshold_override {
        Some(t) => t,
        None => threshold_value(data.p(), data.n(), budget, cfg)?,
    };
    let thresholded = hard_threshold(&perturbed, t, cfg.diagonal_policy);
    let estimate = psd_project(&thresholded)?;
    Ok(PipelineStages {
        perturbed,
        thresholded,
        estimate,
    })
}

/// Central-model DP estimator: perturb, threshold, project.
pub fn dp_thresholding<R: Rng + ?Sized>(
    data: &SampleSet,
    budget: &PrivacyBudget,
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<SymMatrix> {
    Ok(dp_thresholding_stages(data, budget, cfg, rng)?.estimate)
}

/// The direct baseline: the perturbed empirical covariance with no
/// thresholding and no projection.
pub fn naive_dp_estimate<R: Rng + ?Sized>(
    data: &SampleSet,
    budget: &PrivacyBudget,
    rng: &mut R,
) -> Result<SymMatrix> {
    let scale = central_noise_scale(data.n(), budget)?;
    Ok(perturb_covariance(&empirical_covariance(data), scale, rng))
}
