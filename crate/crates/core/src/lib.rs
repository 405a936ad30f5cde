//! Two-stage next-season design prediction over runway-show feature data.
//!
//! Stage one learns a collection embedding from per-look feature vectors
//! with a multi-task network (designer and season classification heads,
//! trained on alternating epochs). Stage two models each designer's style
//! evolution with a per-designer recurrent cell (RNN or LSTM) fed by the
//! designer's collection embeddings and an industry-wide trend embedding,
//! and is evaluated by ranking the true next-season collection against
//! randomly sampled negatives (AUC).
//!
//! All gradients are derived and implemented by hand and verified against
//! central finite differences; there is no autodiff graph.

pub mod corpus;
pub mod embedding;
pub mod eval;
pub mod sequence;
pub mod tensor;

pub use corpus::synth::{generate_synthetic, SynthConfig};
pub use corpus::{load_corpus, split_corpus, write_corpus, Corpus, CorpusError, Season, Split};
pub use embedding::{EmbeddingParams, EmbeddingTable};
pub use eval::{AucReport, EvalError};
pub use sequence::{CellKind, SequenceParams};
pub use tensor::{Matrix, Rng, TensorError};
