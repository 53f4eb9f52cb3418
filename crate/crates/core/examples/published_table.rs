//! Renders the published coefficient/SE pairs through the same inference
//! and formatting code used for fitted models.
//!
//! ```text
//! cargo run --example published_table
//! ```

use opinion_simplify::experiment::{render_table, Outcome, RegressionResult};

fn main() {
    let published = [
        (Outcome::HeardOfCase, 0.0385, 0.0308),
        (Outcome::AreaCorrect, 0.00192, 0.0157),
        (Outcome::DecisionCorrect, 0.107, 0.0354),
        (Outcome::DetailJustRight, 0.202, 0.0384),
        (Outcome::Clarity, 0.431, 0.0752),
        (Outcome::ShareWithFriend, 0.432, 0.0911),
    ];
    let results: Vec<_> = published
        .iter()
        .map(|&(o, b, se)| RegressionResult::from_published(o, b, se, 560, 120))
        .collect();
    print!("{}", render_table(&results, &[]));
    for r in &results {
        let t = &r.terms[0];
        println!("{:<22} t = {:5.2}  p = {:.2e}", r.outcome.label(), t.t, t.p);
    }
}
