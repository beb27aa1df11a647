pub mod algorithms;
pub mod analysis;
pub mod cli;
pub mod domain;
pub mod error;
pub mod ingest;
pub mod metaeval;
pub mod scorer;
pub mod service;
pub mod splitting;
mod store;
pub mod text;

/// The bundled 12-example corpus, canonical JSONL.
pub const TOY_CORPUS: &str = include_str!("../data/toy.jsonl");

/// Sub-sentence splits for the fused sentences of [`TOY_CORPUS`], as
/// `{"sentence", "parts"}` JSON lines.
pub const TOY_SPLITS: &str = include_str!("../data/toy_splits.jsonl");
