//! Loads the bundled case registry and prints cases grouped by topic.
//!
//! ```text
//! cargo run --example registry_overview
//! ```

use std::path::Path;

use opinion_simplify::corpus::{load_registry, TopicArea};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/registry.json");
    let registry = load_registry(&path)?;
    println!("{} cases", registry.len());
    for topic in TopicArea::ALL {
        println!("\n{}", topic.label());
        for case in registry.cases_for_topic(topic) {
            println!(
                "  {:<28} {} ({}), {:?}",
                case.case_id, case.name, case.year, case.decision_direction
            );
        }
    }
    Ok(())
}
