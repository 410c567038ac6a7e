//! Generate a sparse ground truth, sample from it, and run the central
//! estimator picked from the registry.

use dpcov::datagen::{generate_model, sample_gaussian};
use dpcov::mechanism::rng_from_seed;
use dpcov::{EstimatorConfig, EstimatorRegistry, PrivacyBudget};

fn main() -> dpcov::Result<()> {
    let model = generate_model(100, 0.2, 50.0, 200.0, 1)?;
    let data = sample_gaussian(&model, 1000, &mut rng_from_seed(2))?;
    let budget = PrivacyBudget::new(1.0, 1e-3)?;
    let estimator = EstimatorRegistry::builtin().get("central").unwrap();
    let estimate = estimator.estimate(&data, &budget, &EstimatorConfig::default(), 3)?;
    println!("min eigenvalue: {}", estimate.output.min_eigenvalue()?);
    Ok(())
}
