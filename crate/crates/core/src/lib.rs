//! Prosody transfer toolkit for parallel speech corpora.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! * [`audio`]: WAV decoding, resampling, STFT and mel analysis.
//! * [`features`]: frame-level pitch (YIN) and energy, corpus z-normalization,
//!   phoneme-level pooling.
//! * [`alignment`]: forced-alignment utterance records, pharaoh word
//!   alignments, sentence sync maps.
//! * [`sfv`]: source feature vectors, model-input layouts, the addition
//!   transform on predictor outputs.
//! * [`eval`]: pitch moments, DTW pitch distance, energy MAE and reports.
//! * [`corpus`]: segmentation, duration filtering, statistics, splits.
//! * [`cli`]: the `sfvkit` command line.

pub mod alignment;
pub mod audio;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod numeric;
pub mod sfv;

pub use error::{Error, Result};
