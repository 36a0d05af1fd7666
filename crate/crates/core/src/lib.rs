//! Core library for a question-asking training study with children: resource
//! corpus, cue generation and review, question scoring, the scripted
//! dialogue, and statistics for the study report.

pub mod analytics;
pub mod corpus;
pub mod cue_pipeline;
pub mod ids;
pub mod samples;
pub mod dialogue;
pub mod scoring;
pub mod store;
mod text;

pub use text::{normalize, split_sentences, word_count};
