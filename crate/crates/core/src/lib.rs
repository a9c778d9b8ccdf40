//! Tuning log-linear reranking weights over n-best lists.
//!
//! * [`corpus`]: segments, n-best lists, feature vectors and their file formats.
//! * [`metrics`]: corpus BLEU and the sentence-level BLEU+1 family.
//! * [`optimizers`]: MERT, PRO and the iterate-and-accumulate tuning loop.
//! * [`selection`]: length-based tuning-set selection and dataset diagnostics.
//! * [`synth`]: a synthetic stand-in for a decoder and its corpora.
//! * [`harness`]: experiment grids, cutoff sweeps and report files.

pub mod corpus;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod optimizers;
pub mod rng;
pub mod selection;
pub mod synth;

pub use error::{Error, Result};
