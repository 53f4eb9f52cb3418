//! Splits a long synthetic opinion into chunks that fit a small context
//! window and shows the token accounting.
//!
//! ```text
//! cargo run --example chunk_long_text
//! ```

use opinion_simplify::chunker::{chunk_text, estimate_tokens, TokenBudget};
use opinion_simplify::summarizer::prompts::SYLLABUS_SUMMARY;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sentence = "The Court of Appeals held that the statute, as applied to the petitioner, \
                    did not survive strict scrutiny under the Equal Protection Clause. ";
    let opinion = sentence.repeat(120);

    // 2048-token window, 512 reserved for the reply, prompt measured from the
    // real instruction text.
    let budget = TokenBudget::new(2048, 512, 0)?.for_instruction(SYLLABUS_SUMMARY)?;
    let set = chunk_text(&opinion, &budget)?;

    println!(
        "source: {} words, ~{} tokens; allowance per chunk: {} tokens",
        set.source_length_words,
        estimate_tokens(&opinion),
        budget.input_allowance()
    );
    for (i, c) in set.chunks.iter().enumerate() {
        println!(
            "chunk {i}: {} words, ~{} tokens",
            c.split_whitespace().count(),
            estimate_tokens(c)
        );
    }
    Ok(())
}
