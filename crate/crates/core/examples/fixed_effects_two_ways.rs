//! Estimates the same model with explicit case dummies and with the within
//! transformation, and shows that coefficients and clustered SEs agree.
//!
//! ```text
//! cargo run --example fixed_effects_two_ways
//! ```

use std::path::Path;

use opinion_simplify::corpus::load_registry;
use opinion_simplify::experiment::{
    estimate_treatment_effect, simulate_survey, within_transform_estimate, Dgp, Outcome,
    RegressionSpec,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let registry = load_registry(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/registry.json"))?;
    let data = simulate_survey(&registry, 120, &Dgp::default(), 3)?;
    let spec = RegressionSpec::interaction(Outcome::ShareWithFriend);

    let dummies = estimate_treatment_effect(&data, &spec)?;
    let within = within_transform_estimate(&data, &spec)?;
    println!("{:<22} {:>12} {:>12} {:>12} {:>12}", "term", "b (dummies)", "b (within)", "se (dummies)", "se (within)");
    for w in &within.terms {
        let d = dummies.term(&w.term).unwrap();
        println!("{:<22} {:>12.6} {:>12.6} {:>12.6} {:>12.6}", w.term, d.coef, w.coef, d.se, w.se);
    }
    println!("\n{} observations, {} respondents, {} parameters", dummies.n_obs, dummies.n_clusters, dummies.n_params);
    Ok(())
}
