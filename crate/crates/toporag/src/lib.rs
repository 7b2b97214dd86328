//! Topology-aware retrieval-augmented generation over text-attributed graphs.
//!
//! The crate turns a node-attributed graph (every node carries a text, an
//! optional label, an optional timestamp) into the pieces needed to study and
//! run retrieval-augmented text generation where the retriever is driven by
//! graph structure instead of text similarity:
//!
//! - [`graph`]: the graph store, loaders for the on-disk dataset format,
//!   full/partial splits, and edge surgery for leakage control.
//! - [`proximity`]: diffusion-based node embeddings (closeness in the graph).
//! - [`role`]: spectral wavelet embeddings (structural role, position-free).
//! - [`text_embed`]: text embedding provider contract with a deterministic
//!   offline fallback.
//! - [`analysis`]: correlation machinery relating text similarity to the
//!   topological scores.
//! - [`retrieval`]: persisted top-K neighbour indexes and the retrieval
//!   strategies built on them.
//! - [`generation`]: prompt assembly, generation backends (deterministic mock
//!   included), and the resumable experiment runner.
//! - [`evaluation`]: text metrics (BLEU-4, ROUGE-L, embedding F1) and
//!   downstream task probes (node classification, link prediction, feature
//!   imputation).
//! - [`cli`]: the `toporag` command line entry points built from the above.
//!
//! Every stage is deterministic given its seed: repeated runs produce
//! byte-identical artifacts.
//!
//! # Runnable examples
//!
//! Each major capability has a standalone example under `examples/`:
//!
//! ```text
//! cargo run -p toporag --example load_and_split
//! cargo run -p toporag --example proximity_embeddings
//! cargo run -p toporag --example role_embeddings
//! cargo run -p toporag --example text_embeddings
//! cargo run -p toporag --example correlation_analysis
//! cargo run -p toporag --example topk_retrieval
//! cargo run -p toporag --example two_stage_retrieval
//! cargo run -p toporag --example rag_generation
//! cargo run -p toporag --example evaluate_generation
//! cargo run -p toporag --example task_evaluation
//! cargo run -p toporag --example feature_imputation
//! cargo run -p toporag --example end_to_end
//! ```

#![forbid(unsafe_code)]

pub mod analysis;
pub mod cli;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod fixture;
pub mod generation;
pub mod graph;
pub mod proximity;
pub mod retrieval;
pub mod role;
pub mod text_embed;

pub use embedding::{EmbeddingKind, EmbeddingMatrix};
pub use error::{Error, Result};
pub use graph::{SplitAssignment, SplitStrategy, TextAttributedGraph};
