//! Corpus ingestion, tokenization, vocabulary, embeddings and batching.

mod batch;
mod corpus;
mod embeddings;
mod encode;
mod tokenize;
pub mod vocab;

pub use batch::{epoch_order, iterate_batches, Batch, BatchOrder};
pub use corpus::{
    parse_highlights, read_corpus, write_corpus, ColumnMap, CorpusLoad, Example, Highlights, Label, Split,
};
pub use embeddings::{EmbeddingTable, GLOVE_DIM};
pub use encode::{encode_example, wrap, EncodedExample, Limits, Padded};
pub use tokenize::{detokenize, tokenize};
pub use vocab::Vocabulary;
