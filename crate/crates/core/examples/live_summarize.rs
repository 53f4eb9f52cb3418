//! Summarizes one case with a real chat-completion endpoint.
//!
//! Requires `OPINION_SIMPLIFY_API_KEY`. The endpoint defaults to the OpenAI
//! chat completions URL and can be overridden with `OPINION_SIMPLIFY_ENDPOINT`.
//! Responses are cached under `target/live-cache` so reruns are free.
//!
//! ```text
//! OPINION_SIMPLIFY_API_KEY=... cargo run --example live_summarize [case_id]
//! ```

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use opinion_simplify::corpus::load_registry;
use opinion_simplify::summarizer::backend::{HttpBackend, RateLimited, RateLimiter, RetryPolicy, Retrying};
use opinion_simplify::summarizer::cache::ResponseCache;
use opinion_simplify::summarizer::{OutputStyle, Summarizer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let endpoint = std::env::var("OPINION_SIMPLIFY_ENDPOINT")
        .unwrap_or_else(|_| "https://api.openai.com/v1/chat/completions".into());
    let http = match HttpBackend::from_env(endpoint) {
        Ok(h) => h,
        Err(e) => {
            eprintln!("{e}; set it to run this example");
            std::process::exit(2);
        }
    };
    let backend = Retrying::new(RateLimited::new(http, RateLimiter::per_second(1.0)), RetryPolicy::default());

    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let registry = load_registry(root.join("data/registry.json"))?;
    let id = std::env::args().nth(1).unwrap_or_else(|| "riley-2014".into());
    let case = registry.get(&id).ok_or(format!("no case `{id}`"))?;

    let summarizer = Summarizer::new(Arc::new(backend), "gpt-4")
        .with_cache(ResponseCache::in_dir(root.join("../../target/live-cache")));
    let bundle = summarizer.run_pipeline(case, &BTreeSet::from([OutputStyle::SeventhGrade]))?;
    println!("{}", bundle.styled_outputs[&OutputStyle::SeventhGrade]);
    let stats = summarizer.stats();
    eprintln!("{} backend calls, {} cache hits", stats.backend_calls, stats.cache_hits);
    Ok(())
}
