//! Runs the full summarization chain for one case against the offline mock
//! backend, then runs it again to show the cache absorbing every call.
//!
//! ```text
//! cargo run --example mock_pipeline [case_id]
//! ```

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use opinion_simplify::corpus::load_registry;
use opinion_simplify::readability::score_text;
use opinion_simplify::summarizer::backend::Recording;
use opinion_simplify::summarizer::cache::ResponseCache;
use opinion_simplify::summarizer::{FixedClock, MockBackend, OutputStyle, Summarizer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let registry = load_registry(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/registry.json"))?;
    let id = std::env::args().nth(1).unwrap_or_else(|| "obergefell-2015".into());
    let case = registry.get(&id).ok_or(format!("no case `{id}`"))?;

    let backend = Arc::new(Recording::new(MockBackend::default()));
    let summarizer = Summarizer::new(backend.clone(), "mock")
        .with_cache(ResponseCache::in_memory())
        .with_clock(Arc::new(FixedClock(0)));
    let styles: BTreeSet<_> = OutputStyle::ALL.into_iter().collect();

    let bundle = summarizer.run_pipeline(case, &styles)?;
    println!("facts summary:\n  {}\n", bundle.facts_summary);
    println!("intermediate ({} syllabus chunks):\n  {}\n", bundle.chunk_summaries.len(), bundle.intermediate_summary);
    for (style, text) in &bundle.styled_outputs {
        let score = score_text(style.as_str(), text, Default::default())?;
        println!("{style} (Flesch {:.1}):\n  {text}\n", score.score);
    }
    for (stage, p) in &bundle.provenance {
        println!("{stage:<24} prompt {} in {:>4} out {:>4}", &p.prompt_hash[..12], p.input_tokens, p.output_tokens);
    }

    let first = backend.calls();
    summarizer.run_pipeline(case, &styles)?;
    println!("\nbackend calls: {first} on the first run, {} on the rerun", backend.calls() - first);
    Ok(())
}
