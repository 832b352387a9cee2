//! Embedding-space topic modeling with a conditional-transport objective.
//!
//! Each document is a discrete distribution over the embeddings of its
//! words; each document's topic mixture is a discrete distribution over a
//! shared set of topic embeddings living in the same space. Training
//! minimizes the bidirectional conditional-transport cost between the two,
//! regularized by a Poisson reconstruction likelihood whose topic-word
//! matrix is the softmax of word/topic inner products. Topic proportions
//! are produced by an amortized Weibull encoder.
//!
//! The crate is `no_std` (with `alloc`). File formats, checkpoints and the
//! command-line interface live in the companion `wete` crate.
//!
//! # Feature flags
//! - **`std`** (default): use the platform math library for `exp`/`ln`/`pow`.
//!   Without it every transcendental goes through [`libm`].
#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod adam;
pub mod corpus;
pub mod embedding;
mod error;
pub mod grad;
pub mod math;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod train;
pub mod transport;

pub use corpus::{BuildOptions, Corpus, Document, Vocabulary};
pub use embedding::{CoverageReport, EmbeddingMatrix};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{InputTransform, ModelConfig, TrainingMode, WeteModel};
pub use train::{EpochLog, TrainConfig};
