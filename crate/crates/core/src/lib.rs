//! Hypernym ranking for financial terms by learned semantic similarity.
//!
//! The pipeline augments labeled terms with definitions ([`corpus`]),
//! builds hierarchy-graded training pairs ([`negsampler`]), fine-tunes a
//! projection head over base embeddings ([`trainer`]), scores and ranks
//! every label definition ([`ranker`]) and reports Accuracy / Mean Rank
//! ([`eval`]).

pub mod analysis;
pub mod baselines;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod negsampler;
pub mod ranker;
pub mod taxonomy;
pub mod trainer;

pub use corpus::{Source, TermRecord};
pub use embeddings::{cosine, hash_embed, Embedder, EmbeddingTable, HashEmbedder};
pub use error::{Error, Result};
pub use eval::EvalReport;
pub use negsampler::ScoredPair;
pub use ranker::{RankedList, SimilarityMatrix};
pub use taxonomy::LabelTaxonomy;
pub use trainer::{ProjectionModel, TrainConfig};
