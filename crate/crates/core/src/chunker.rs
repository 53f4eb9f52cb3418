//! Token budgeting and prompt-sized chunking.
//!
//! Token counts are estimated from whitespace word counts at 8192 tokens per
//! 6000 words. The estimator is a trait so an exact tokenizer can be dropped
//! in later.

use serde::{Deserialize, Serialize};

use crate::readability::sentence_end_flags;
use crate::text;

pub const DEFAULT_CONTEXT_LIMIT: usize = 8192;
pub const DEFAULT_RESERVED_OUTPUT: usize = 4096;

const RATIO_TOKENS: usize = 8192;
const RATIO_WORDS: usize = 6000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChunkError {
    #[error(
        "invalid budget: context {context_limit} must exceed reserved output {reserved_output} + prompt overhead {prompt_overhead}"
    )]
    InvalidBudget {
        context_limit: usize,
        reserved_output: usize,
        prompt_overhead: usize,
    },
    #[error("budget unsatisfiable: word `{word}` needs {needed} tokens, allowance is {allowance}")]
    BudgetUnsatisfiable {
        word: String,
        needed: usize,
        allowance: usize,
    },
}

pub trait TokenEstimator: Send + Sync {
    fn estimate(&self, text: &str) -> usize {
        self.estimate_words(text.split_whitespace().count())
    }

    /// Estimate for a span of `n` whitespace-delimited words.
    fn estimate_words(&self, n: usize) -> usize;
}

/// `ceil(words * 8192 / 6000)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct WordRatioEstimator;

impl TokenEstimator for WordRatioEstimator {
    fn estimate_words(&self, n: usize) -> usize {
        (n * RATIO_TOKENS).div_ceil(RATIO_WORDS)
    }
}

pub fn estimate_tokens(text: &str) -> usize {
    WordRatioEstimator.estimate(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBudget {
    pub context_limit: usize,
    pub reserved_output: usize,
    pub prompt_overhead: usize,
}

impl Default for TokenBudget {
    fn default() -> Self {
        TokenBudget {
            context_limit: DEFAULT_CONTEXT_LIMIT,
            reserved_output: DEFAULT_RESERVED_OUTPUT,
            prompt_overhead: 0,
        }
    }
}

impl TokenBudget {
    pub fn new(
        context_limit: usize,
        reserved_output: usize,
        prompt_overhead: usize,
    ) -> Result<Self, ChunkError> {
        let b = TokenBudget {
            context_limit,
            reserved_output,
            prompt_overhead,
        };
        b.validate()?;
        Ok(b)
    }

    /// Same limits, with the overhead measured from a rendered instruction.
    pub fn for_instruction(&self, instruction: &str) -> Result<Self, ChunkError> {
        TokenBudget::new(
            self.context_limit,
            self.reserved_output,
            estimate_tokens(instruction),
        )
    }

    pub fn validate(&self) -> Result<(), ChunkError> {
        let used = self.reserved_output + self.prompt_overhead;
        if used == 0 || self.context_limit <= used {
            return Err(ChunkError::InvalidBudget {
                context_limit: self.context_limit,
                reserved_output: self.reserved_output,
                prompt_overhead: self.prompt_overhead,
            });
        }
        Ok(())
    }

    pub fn input_allowance(&self) -> usize {
        self.context_limit
            .saturating_sub(self.reserved_output + self.prompt_overhead)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkSet {
    pub chunks: Vec<String>,
    pub source_length_words: usize,
}

impl ChunkSet {
    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }
}

pub fn chunk_text(text: &str, budget: &TokenBudget) -> Result<ChunkSet, ChunkError> {
    chunk_text_with(text, budget, &WordRatioEstimator)
}

/// Greedy packing of whole sentences into chunks that fit the input
/// allowance. A sentence that alone exceeds the allowance is split at word
/// boundaries. Chunks are verbatim slices of `text`, so inner whitespace is
/// preserved.
pub fn chunk_text_with(
    text: &str,
    budget: &TokenBudget,
    estimator: &dyn TokenEstimator,
) -> Result<ChunkSet, ChunkError> {
    budget.validate()?;
    let allowance = budget.input_allowance();
    let toks = text::tokens(text);
    let n = toks.len();
    if n == 0 {
        return Ok(ChunkSet {
            chunks: Vec::new(),
            source_length_words: 0,
        });
    }
    if estimator.estimate_words(1) > allowance {
        return Err(ChunkError::BudgetUnsatisfiable {
            word: toks[0].text.to_string(),
            needed: estimator.estimate_words(1),
            allowance,
        });
    }

    // Sentence spans as token index ranges.
    let ends = sentence_end_flags(&toks);
    let mut sentences = Vec::new();
    let mut s = 0;
    for (i, &end) in ends.iter().enumerate() {
        if end || i + 1 == n {
            sentences.push((s, i + 1));
            s = i + 1;
        }
    }

    let fits = |a: usize, b: usize| estimator.estimate_words(b - a) <= allowance;
    let mut ranges: Vec<(usize, usize)> = Vec::new();
    let mut cur: Option<(usize, usize)> = None;
    for (mut a, b) in sentences {
        if let Some((ca, _)) = cur {
            if fits(ca, b) {
                cur = Some((ca, b));
                continue;
            }
            ranges.extend(cur.take());
        }
        // Sentence starts a fresh chunk; split it if it alone is too long.
        while !fits(a, b) {
            let mut cut = a + 1;
            while cut < b && fits(a, cut + 1) {
                cut += 1;
            }
            ranges.push((a, cut));
            a = cut;
        }
        cur = Some((a, b));
    }
    ranges.extend(cur);

    let chunks = ranges
        .into_iter()
        .map(|(a, b)| text[toks[a].start..toks[b - 1].end].to_string())
        .collect();
    Ok(ChunkSet {
        chunks,
        source_length_words: n,
    })
}
