//! Text-based LSTM composition.
//!
//! Chord progressions and drum tracks are rendered as plain-text token
//! streams, a stacked LSTM language model is trained on them at character or
//! word granularity, and new material is sampled with a diversity exponent
//! `α` that can vary over regions of the output.

pub mod chord;
pub mod drum;
pub mod nn;
pub mod sampler;
pub mod tokenizer;
pub mod trainer;
