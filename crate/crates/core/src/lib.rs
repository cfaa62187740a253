//! Chunk-level graph retrieval over heterogeneous corpora.
//!
//! The library splits into an offline and an online half. Offline:
//! documents, tables, and semi-structured objects are ingested into a
//! uniform chunk store ([`corpus`]), documents are re-split at embedding
//! coherence boundaries ([`chunker`]), and a similarity graph is built
//! from metadata signals with percentile pruning ([`graph`]). Online:
//! hybrid BM25+dense seeding, one-hop neighbor expansion, and neighbor
//! reranking answer queries under a fixed k+k' budget ([`retrieve`]).
//! Explicit property graphs get a schema-aware plan executor with a
//! hybrid fallback ([`kg`]), and [`eval`] provides the metrics and
//! benchmark harness used to compare the methods.

pub mod chunker;
pub mod corpus;
pub mod dense;
pub mod encoder;
pub mod eval;
pub mod graph;
pub mod hnsw;
pub mod kg;
pub mod lexical;
pub mod retrieve;
pub mod text;

pub use corpus::{Chunk, ChunkId, CorpusManifest, Modality};
pub use encoder::{EmbeddingVector, Encoder, HashedBagEncoder};
pub use retrieve::{HybridIndex, RankedResult, RetrievalBudget};
