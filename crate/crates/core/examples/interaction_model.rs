//! Education heterogeneity: effect 0.2 for college graduates and 0.5 for
//! everyone else, recovered exactly from noiseless data and approximately
//! from noisy draws.
//!
//! ```text
//! cargo run --example interaction_model
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use opinion_simplify::corpus::load_registry;
use opinion_simplify::experiment::{
    estimate_interaction, render_table, simulate_survey, Dgp, Outcome, OutcomeDgp, RegressionSpec,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let registry = load_registry(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/registry.json"))?;
    let clarity = OutcomeDgp {
        baseline: 3.0,
        effect: 0.2,
        interaction: 0.3,
        case_spread: 0.3,
        respondent_sd: 0.5,
        residual_sd: 1.0,
    };
    let spec = RegressionSpec::interaction(Outcome::Clarity);
    let mut results = Vec::new();
    for noise in [0.0, 0.5, 1.0] {
        let dgp = Dgp {
            outcomes: BTreeMap::from([(Outcome::Clarity, clarity)]),
            noise,
            ..Dgp::default()
        };
        let data = simulate_survey(&registry, 120, &dgp, 7)?;
        results.push(estimate_interaction(&data, &spec)?);
    }
    for t in &results[0].terms[1..4] {
        println!("noiseless {:<20} {:.6}", t.term, (t.coef * 1e6).round() / 1e6 + 0.0);
    }
    println!();
    print!("{}", render_table(&results[1..], &["Noise 0.5", "Noise 1.0"]));
    Ok(())
}
