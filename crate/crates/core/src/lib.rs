//! Rhetorical question extraction and sarcasm / RQ classification.
//!
//! The pipeline runs corpus loading ([`corpus`]), sentence segmentation
//! ([`text`]), RQ extraction ([`rq_extract`]), dictionary and embedding
//! features ([`lexicon`], [`embeddings`]), a linear SVM ([`svm`]), a
//! Conv + BiLSTM network ([`neural`]), and evaluation ([`eval`]).

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod lexicon;
pub mod neural;
pub mod rq_extract;
pub mod svm;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
