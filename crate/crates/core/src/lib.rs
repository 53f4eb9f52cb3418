//! Plain-language summaries of court opinions.
//!
//! * [`corpus`] loads the case registry.
//! * [`chunker`] estimates tokens and splits long inputs to fit a context window.
//! * [`summarizer`] chains facts summary, syllabus summaries, and style transfer
//!   against a pluggable chat-completion backend, with caching.
//! * [`readability`] computes Flesch Reading Ease.
//! * [`experiment`] simulates the survey design and estimates treatment
//!   effects with case fixed effects and respondent-clustered errors.
//! * [`cli`] wires these into batch commands.

pub mod chunker;
pub mod cli;
pub mod corpus;
pub mod experiment;
pub mod readability;
pub mod summarizer;

mod fsutil;
mod text;

pub use fsutil::atomic_write;
