//! Transition-based neural Chinese word segmentation.
//!
//! The library is organized around a small set of layers:
//!
//! - [`diffcore`]: parameter storage, an eager expression graph with
//!   reverse-mode gradients, Adagrad and dropout.
//! - [`transition`]: the segmentation state machine (separate/append
//!   actions over a character stream).
//! - [`corpusio`]: corpus parsing, boundary-tag conversion, embedding
//!   files and word-level evaluation.
//! - [`encoders`]: the scoring network that maps a transition state to
//!   action scores, with configurable character and word context encoders.
//! - [`decoder`]: beam-search decoding over transition sequences.
//! - [`trainer`]: globally-optimized training with early updates.
//! - [`pretrainer`]: multi-task pretraining of the character window
//!   network and parameter transfer into a segmentor.
//! - [`modelio`]: binary model serialization.
//! - [`synth`]: synthetic corpus generators used by tests and demos.

pub mod corpusio;
pub mod decoder;
pub mod diffcore;
pub mod encoders;
pub mod error;
pub mod modelio;
pub mod pretrainer;
pub mod synth;
pub mod trainer;
pub mod transition;
pub mod vocab;

pub use error::{Error, Result};
