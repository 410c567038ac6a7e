//! Gaussian-mechanism noise calibration and symmetric noise sampling.
//!
//! The central model adds one symmetric noise matrix to the empirical
//! covariance with per-entry standard deviation
//! `sigma_1 = sqrt(2 ln(1.25/delta)) / (n eps)`; the local model has each
//! record add its own symmetric noise with `sigma = sqrt(2 ln(1.25/delta)) / eps`.
//! All logarithms are natural.
//!
//! Randomness is deterministic and splittable: streams are derived from a
//! base seed with [`derive_seed`], so trial `t` of an experiment (or player
//! `i` of a local protocol) owns an independent generator regardless of
//! scheduling order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;

/// Privacy parameters (epsilon, delta), validated at construction.
///
/// The calibration assumes `0 < eps, delta <= 1`. Larger epsilons are
/// accepted (benchmarks use eps = 2) but flagged via
/// [`PrivacyBudget::epsilon_above_one`] so callers can warn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(Error::InvalidBudget(format!(
                "epsilon must be a positive real, got {epsilon}"
            )));
        }
        if !delta.is_finite() || delta <= 0.0 || delta > 1.0 {
            return Err(Error::InvalidBudget(format!(
                "delta must lie in (0, 1], got {delta}"
            )));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// True when epsilon exceeds the calibration's nominal range.
    pub fn epsilon_above_one(&self) -> bool {
        self.epsilon > 1.0
    }
}

/// Standard deviation of each upper-triangle noise entry.
///
/// `sigma = 0` is reserved for the explicit degenerate test mode
/// ([`NoiseScale::zero`]); the calibration formulas never produce it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseScale {
    sigma: f64,
}

impl NoiseScale {
    pub fn new(sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "noise scale must be a positive real, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    /// Noiseless test mode.
    pub fn zero() -> Self {
        Self { sigma: 0.0 }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Rescales by a positive factor (the sensitivity-multiplier knob).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !factor.is_finite() || factor <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be a positive real, got {factor}"
            )));
        }
        if self.sigma == 0.0 {
            return Ok(*self);
        }
        Self::new(self.sigma * factor)
    }
}

fn log_term(budget: &PrivacyBudget) -> Result<f64> {
    let arg = 1.25 / budget.delta();
    let ln = arg.ln();
    // delta <= 1 guarantees ln(1.25/delta) > 0; guard anyway so a widened
    // budget range can never yield a negative variance silently.
    if ln <= 0.0 {
        return Err(Error::InvalidBudget(format!(
            "delta = {} leaves no noise variance (requires delta < 1.25)",
            budget.delta()
        )));
    }
    Ok(ln)
}

/// Central-model scale: `sigma_1 = sqrt(2 ln(1.25/delta)) / (n eps)`.
pub fn central_noise_scale(n: usize, budget: &PrivacyBudget) -> Result<NoiseScale> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let ln = log_term(budget)?;
    NoiseScale::new((2.0 * ln).sqrt() / (n as f64 * budget.epsilon()))
}

/// Local-model scale: `sigma = sqrt(2 ln(1.25/delta)) / eps`.
pub fn local_noise_scale(budget: &PrivacyBudget) -> Result<NoiseScale> {
    let ln = log_term(budget)?;
    NoiseScale::new((2.0 * ln).sqrt() / budget.epsilon())
}

/// Samples a symmetric p x p Gaussian noise matrix.
///
/// The upper triangle including the diagonal is filled with i.i.d. draws
/// from `N(0, sigma^2)` in row-major order (exactly `p(p+1)/2` draws are
/// consumed from `rng`, also in the degenerate `sigma = 0` mode); each
/// lower-triangle entry is copied from its upper-triangle counterpart.
pub fn sample_symmetric_noise<R: Rng + ?Sized>(
    p: usize,
    scale: NoiseScale,
    rng: &mut R,
) -> Result<SymMatrix> {
    if p == 0 {
        return Err(Error::InvalidParameter("p must be >= 1".into()));
    }
    let sigma = scale.sigma();
    Ok(SymMatrix::from_upper_fn(p, |_, _| {
        let z: f64 = rng.sample(StandardNormal);
        sigma * z
    }))
}

/// Derives an independent stream seed from `(base, stream)` with a
/// SplitMix64 finalizer.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic generator for a derived seed.
pub fn rng_from_seed(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}
