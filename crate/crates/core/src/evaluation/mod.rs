//! Label accuracy, perplexity, BLEU, human-score aggregation and reports.

mod annotation;
mod bleu;
mod metrics;
mod report;

pub use annotation::{expl_at_k, read_annotations, AnnotationRecord, ExplAtK, ScoreMode};
pub use bleu::{bleu, corpus_bleu, BleuStats, MAX_ORDER};
pub use metrics::{label_accuracy, perplexity, perplexity_from, token_stats};
pub use report::{
    dump_rows, evaluate, evaluate_pipeline, generation_bleu, inter_annotator_bleu, references, transfer_eval,
    write_dump, DumpRow, EvalReport, REFERENCES_FIRST_TWO,
};
