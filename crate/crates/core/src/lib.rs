//! # deid-core
//!
//! A self-contained toolkit for detecting protected health information (PHI)
//! in clinical text. It ships two interchangeable sequence taggers — a
//! linear-chain CRF over hand-crafted features and a character+word
//! bidirectional LSTM with a transition-matrix decoding lattice — together
//! with the pre-processing, BIOEU label codec, evaluation, significance
//! testing, and error-analysis machinery needed to run them end to end.
//!
//! The crate is organized by pipeline stage:
//!
//! * [`corpus`] — annotated-record data model, stand-off file format, corpus
//!   statistics, and a deterministic synthetic-corpus generator.
//! * [`preprocess`] — offset-preserving tokenizer and rule-based sentence
//!   splitter.
//! * [`tagscheme`] — BIOEU span/label codec with lenient repair.
//! * [`features`] — feature extraction, gazetteers, feature indexing, and
//!   greedy feature-group selection for the CRF.
//! * [`crf`] — linear-chain CRF: forward–backward, L2-regularized maximum
//!   likelihood training, Viterbi decoding.
//! * [`tensorcore`] — minimal tape-based reverse-mode autodiff substrate.
//! * [`lstm_tagger`] — the neural tagger: embeddings (including a skip-gram
//!   trainer), coupled-gate LSTM cells, emission layer, decoding lattice,
//!   SGD training.
//! * [`eval`] — strict/relaxed/token matching, micro/macro P/R/F1,
//!   category-set filtering, approximate-randomization significance test.
//! * [`error_analysis`] — four-way error taxonomy, confusion/error matrix,
//!   document-frequency summaries.

pub mod corpus;
pub mod crf;
pub mod error_analysis;
pub mod errors;
pub mod eval;
pub mod features;
pub mod lstm_tagger;
pub mod preprocess;
pub mod tagscheme;
pub mod tensorcore;

pub use errors::{DeidError, Result};

/// FNV-1a 64-bit hash. Used wherever the toolkit needs a hash that is
/// stable across processes and builds (deterministic OOV vectors, output
/// provenance headers).
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Mixes a base seed with a stream index into an independent 64-bit seed
/// (splitmix64 finalizer). Lets per-document / per-shuffle random streams
/// stay reproducible under any processing order.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
