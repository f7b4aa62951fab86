use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::vocab::{Vocabulary, LABEL_BASE};
use crate::error::{Error, Result};

pub const GLOVE_DIM: usize = 300;

/// Fixed word vectors, one row per vocabulary id.
///
/// Reserved tokens and words missing from the source file are zero rows.
/// Label-token rows are kept here as initial values only; models train
/// their own copy.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub data: Vec<f32>,
    pub frozen: bool,
}

impl EmbeddingTable {
    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, id: usize) -> &[f32] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    /// Read a `token f1 ... f<dim>` text file, keeping rows for vocabulary tokens.
    pub fn load(path: &Path, vocab: &Vocabulary, dim: usize) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut data = vec![0.0f32; vocab.len() * dim];
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = n + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != dim + 1 {
                return Err(Error::Parse {
                    path: path.into(),
                    line: lineno,
                    msg: format!("expected a token and {dim} floats, found {} fields", fields.len()),
                });
            }
            let mut row = Vec::with_capacity(dim);
            for f in &fields[1..] {
                let v: f32 = f.parse().map_err(|_| Error::Parse {
                    path: path.into(),
                    line: lineno,
                    msg: format!("unparsable float `{f}`"),
                })?;
                row.push(v);
            }
            let token = fields[0];
            if !vocab.contains(token) {
                continue;
            }
            let id = vocab.id(token);
            if id < LABEL_BASE {
                continue;
            }
            data[id * dim..(id + 1) * dim].copy_from_slice(&row);
        }
        Ok(EmbeddingTable { dim, data, frozen: true })
    }

    /// Seeded Gaussian-ish vectors for every non-reserved token, for synthetic corpora without a vector file.
    pub fn random(vocab: &Vocabulary, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = vec![0.0f32; vocab.len() * dim];
        for id in LABEL_BASE..vocab.len() {
            for v in &mut data[id * dim..(id + 1) * dim] {
                // Sum of uniforms: cheap bell shape, unit-ish variance.
                let s: f32 = (0..3).map(|_| rng.gen_range(-1.0f32..1.0)).sum();
                *v = s;
            }
        }
        EmbeddingTable { dim, data, frozen: true }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn vocab() -> Vocabulary {
        Vocabulary::from_tokens(["dog".to_string(), "cat".to_string()]).unwrap()
    }

    #[test]
    fn copies_known_rows_and_zeros_the_rest() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "dog 1 2 3").unwrap();
        writeln!(f, "zebra 9 9 9").unwrap();
        writeln!(f, "<UNK> 5 5 5").unwrap();
        writeln!(f, "neutral 0.5 0.25 -1").unwrap();
        let v = vocab();
        let t = EmbeddingTable::load(f.path(), &v, 3).unwrap();
        assert_eq!(t.row(v.id("dog")), &[1.0, 2.0, 3.0]);
        assert_eq!(t.row(v.id("cat")), &[0.0; 3]);
        assert_eq!(t.row(v.id("<UNK>")), &[0.0; 3]);
        assert_eq!(t.row(v.id("neutral")), &[0.5, 0.25, -1.0]);
        assert!(t.frozen);
    }

    #[test]
    fn wrong_arity_reports_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "dog 1 2 3").unwrap();
        writeln!(f, "cat 1 2").unwrap();
        match EmbeddingTable::load(f.path(), &vocab(), 3) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn short_glove_line_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        let floats: Vec<String> = (0..299).map(|i| format!("{}", i as f32 * 0.01)).collect();
        writeln!(f, "dog {}", floats.join(" ")).unwrap();
        assert!(matches!(EmbeddingTable::load(f.path(), &vocab(), GLOVE_DIM), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn bad_float_reports_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "dog 1 x 3").unwrap();
        assert!(matches!(EmbeddingTable::load(f.path(), &vocab(), 3), Err(Error::Parse { line: 1, .. })));
    }
}
