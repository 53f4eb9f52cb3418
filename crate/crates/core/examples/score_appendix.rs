//! Scores the fourteen seventh-grade summaries shipped under `data/appendix/`.
//!
//! ```text
//! cargo run --example score_appendix
//! ```

use std::path::Path;

use opinion_simplify::readability::score_corpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/appendix");
    let mut texts = Vec::new();
    for entry in std::fs::read_dir(&dir)? {
        let path = entry?.path();
        let id = path.file_stem().unwrap().to_string_lossy().into_owned();
        texts.push((id, std::fs::read_to_string(&path)?));
    }
    texts.sort();

    let report = score_corpus(&texts)?;
    print!("{}", report.to_csv());
    println!(
        "\nmean Flesch reading ease: {:.1} ({})",
        report.mean_score,
        report.mean_band()
    );
    Ok(())
}
