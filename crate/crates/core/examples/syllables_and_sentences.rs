//! Shows how a passage is segmented and syllabified before scoring.
//!
//! ```text
//! cargo run --example syllables_and_sentences
//! ```

use opinion_simplify::readability::{
    count_syllables, flesch_reading_ease, interpret_score, segment_sentences, TextStatistics,
};

const PASSAGE: &str = "In Riley v. California, 573 U.S. 373 (2014), the Court held that police \
generally need a warrant to search a cell phone. Phones hold a lot of private \
information! 1) Get a warrant. 2) Then search.";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (i, s) in segment_sentences(PASSAGE).iter().enumerate() {
        println!("sentence {i}: {s}");
    }
    println!();
    for w in ["Court", "warrant", "information", "unconstitutional", "isn't", "churches"] {
        println!("{w:<18} {} syllables", count_syllables(w)?);
    }
    let stats = TextStatistics::from_text(PASSAGE);
    let score = flesch_reading_ease(&stats)?;
    println!(
        "\n{} words, {} sentences, {} syllables -> Flesch {score:.1} ({})",
        stats.total_words,
        stats.total_sentences,
        stats.total_syllables,
        interpret_score(score)
    );
    Ok(())
}
