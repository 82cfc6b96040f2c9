//! Connected text recognition: lexical error recovery for misspellings,
//! run-ons, splits and real-word errors.
//!
//! Typing is modeled as a noisy channel. Each vocabulary word gets a
//! left-to-right character HMM (the orthographic decoder); a statistical
//! language model over word ids (the linguistic decoder) sits on top.
//! A Token Passing search couples the two so that tokenization is part
//! of correction: the best path through the coupled networks picks both
//! the word sequence and where the word boundaries fall.
//!
//! Module map:
//! - [`hmm`]: discrete entry/exit-state HMMs (forward, backward, Viterbi,
//!   Baum-Welch, additive smoothing).
//! - [`token`]: tokens, word link records, the per-character step
//!   procedure, beam pruning, and weighted Levenshtein distance as a
//!   token-passing network.
//! - [`alphabet`]: the character alphabet shared by all word models.
//! - [`od`]: the orthographic decoder (per-word models and isolated-word
//!   recognition).
//! - [`errgen`]: synthetic error corpora for channel training.
//! - [`ld`]: linguistic decoders (baseline, unigram, tag bigram).
//! - [`recognizer`]: the connected recognition engine (batch,
//!   incremental, n-best).
//! - [`eval`]: recall/precision evaluation against hand-made keys.

pub mod alphabet;
pub mod errgen;
pub mod error;
pub mod eval;
pub mod hmm;
pub mod ld;
pub mod model_io;
pub mod od;
pub mod recognizer;
pub mod token;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{CtrError, Result};
