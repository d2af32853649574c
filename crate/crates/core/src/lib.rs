//! Voice-driven collaborative search.
//!
//! The pipeline runs spoken audio through an MFCC front end ([`mfcc`]),
//! scores the features against per-word hidden Markov models ([`hmm`],
//! [`recognizer`]), feeds the transcript to an inverted-index search engine
//! ([`ir`]) and fuses the per-collaborator result lists of a shared session
//! ([`cis`]).

pub mod audio;
pub mod cis;
pub mod error;
pub mod hmm;
pub mod ir;
pub mod mfcc;
pub mod recognizer;
pub mod script;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
