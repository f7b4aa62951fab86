use rand::seq::SliceRandom;

use super::encode::{EncodedExample, Padded};
use super::Label;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchOrder {
    /// Corpus order (valid/test).
    Stable,
    /// Permutation drawn from `seed` mixed with `epoch`.
    Shuffled { seed: u64, epoch: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Positions of the rows in the source split.
    pub indices: Vec<usize>,
    pub premise: Padded,
    pub hypothesis: Padded,
    pub labels: Vec<Label>,
    /// First explanation of each example, `<BOS>`/`<EOS>` wrapped.
    pub explanation: Padded,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn epoch_order(n: usize, order: BatchOrder) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    if let BatchOrder::Shuffled { seed, epoch } = order {
        let mut rng = seed::rng(seed, &[0x5348_5546, epoch]);
        idx.shuffle(&mut rng);
    }
    idx
}

/// Split `examples` into batches of `batch_size`; the last batch may be partial.
pub fn iterate_batches(examples: &[EncodedExample], batch_size: usize, order: BatchOrder) -> Vec<Batch> {
    assert!(batch_size > 0, "batch size must be positive");
    let idx = epoch_order(examples.len(), order);
    idx.chunks(batch_size)
        .map(|chunk| {
            let rows: Vec<&EncodedExample> = chunk.iter().map(|&i| &examples[i]).collect();
            let empty: &[usize] = &[];
            Batch {
                indices: chunk.to_vec(),
                premise: Padded::new(&rows.iter().map(|e| e.premise.as_slice()).collect::<Vec<_>>()),
                hypothesis: Padded::new(&rows.iter().map(|e| e.hypothesis.as_slice()).collect::<Vec<_>>()),
                labels: rows.iter().map(|e| e.label).collect(),
                explanation: Padded::new(
                    &rows.iter().map(|e| e.explanations.first().map_or(empty, Vec::as_slice)).collect::<Vec<_>>(),
                ),
            }
        })
        .collect()
}
