use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{SenseId, Vocabulary, WordId};
use crate::embeddings::SenseVectors;
use crate::error::{Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 0.025;

/// Skip-gram parameters with a variable number of input (sense) vectors per
/// word and one shared context vector per word, plus AdaGrad state.
#[derive(Clone, Debug, PartialEq)]
pub struct SenseModel {
    pub(crate) dim: usize,
    pub(crate) learning_rate: f64,
    /// word -> row index of each sense in `input`
    pub(crate) sense_rows: Vec<Vec<u32>>,
    pub(crate) input: Vec<f64>,
    pub(crate) input_acc: Vec<f64>,
    pub(crate) context: Vec<f64>,
    pub(crate) context_acc: Vec<f64>,
}

impl SenseModel {
    /// One sense per word with components uniform in `[-0.5/d, 0.5/d]`;
    /// context vectors and AdaGrad accumulators start at zero.
    pub fn new(vocab_len: usize, dim: usize, learning_rate: f64, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Precondition("dimension must be at least 1".into()));
        }
        if learning_rate.is_nan() || learning_rate <= 0.0 {
            return Err(Error::Precondition("learning rate must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 0.5 / dim as f64;
        let input: Vec<f64> = (0..vocab_len * dim)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Ok(SenseModel {
            dim,
            learning_rate,
            sense_rows: (0..vocab_len as u32).map(|w| vec![w]).collect(),
            input_acc: vec![0.0; input.len()],
            input,
            context: vec![0.0; vocab_len * dim],
            context_acc: vec![0.0; vocab_len * dim],
        })
    }

    pub fn from_vocab(vocab: &Vocabulary, dim: usize, seed: u64) -> Result<Self> {
        Self::new(vocab.len(), dim, DEFAULT_LEARNING_RATE, seed)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_len(&self) -> usize {
        self.sense_rows.len()
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn sense_count(&self, word: WordId) -> usize {
        self.sense_rows[word as usize].len()
    }

    pub fn max_sense_count(&self) -> usize {
        self.sense_rows.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn total_senses(&self) -> usize {
        self.input.len() / self.dim
    }

    /// `d * (Σ_w m(w) + |V|)`
    pub fn parameter_count(&self) -> usize {
        self.input.len() + self.context.len()
    }

    pub(crate) fn row_of(&self, word: WordId, sense: SenseId) -> Result<usize> {
        self.sense_rows
            .get(word as usize)
            .and_then(|rows| rows.get(sense as usize))
            .map(|&r| r as usize)
            .ok_or_else(|| {
                Error::Invariant(format!(
                    "sense {sense} of word {word} does not exist (m = {})",
                    self.sense_rows.get(word as usize).map_or(0, Vec::len)
                ))
            })
    }

    pub fn input_vector(&self, word: WordId, sense: SenseId) -> &[f64] {
        let row = self.sense_rows[word as usize][sense as usize] as usize;
        &self.input[row * self.dim..(row + 1) * self.dim]
    }

    pub fn input_vector_mut(&mut self, word: WordId, sense: SenseId) -> &mut [f64] {
        let row = self.sense_rows[word as usize][sense as usize] as usize;
        &mut self.input[row * self.dim..(row + 1) * self.dim]
    }

    pub fn context_vector(&self, word: WordId) -> &[f64] {
        let w = word as usize;
        &self.context[w * self.dim..(w + 1) * self.dim]
    }

    pub fn context_vector_mut(&mut self, word: WordId) -> &mut [f64] {
        let w = word as usize;
        &mut self.context[w * self.dim..(w + 1) * self.dim]
    }

    /// Appends a sense to `word` with the given input vector. The AdaGrad
    /// history is inherited from `parent`.
    pub fn add_sense(&mut self, word: WordId, parent: SenseId, vector: &[f64]) -> Result<SenseId> {
        if vector.len() != self.dim {
            return Err(Error::Invariant(format!(
                "new sense vector has {} components, expected {}",
                vector.len(),
                self.dim
            )));
        }
        let parent_row = self.row_of(word, parent)?;
        let acc: Vec<f64> =
            self.input_acc[parent_row * self.dim..(parent_row + 1) * self.dim].to_vec();
        let row = self.total_senses() as u32;
        self.input.extend_from_slice(vector);
        self.input_acc.extend_from_slice(&acc);
        let rows = &mut self.sense_rows[word as usize];
        rows.push(row);
        Ok((rows.len() - 1) as SenseId)
    }

    pub fn all_finite(&self) -> bool {
        self.input.iter().chain(&self.context).all(|x| x.is_finite())
    }

    /// Input vectors keyed by surface token, in (word id, sense) order.
    pub fn sense_vectors(&self, vocab: &Vocabulary) -> SenseVectors {
        let entries = (0..self.vocab_len() as WordId).map(|w| {
            let senses = (0..self.sense_count(w) as SenseId)
                .map(|s| self.input_vector(w, s).to_vec())
                .collect();
            (vocab.word(w).to_string(), senses)
        });
        SenseVectors::from_entries(self.dim, entries).expect("model rows are consistent")
    }

    /// Context vectors keyed by surface token.
    pub fn context_vectors(&self, vocab: &Vocabulary) -> SenseVectors {
        let entries = (0..self.vocab_len() as WordId)
            .map(|w| (vocab.word(w).to_string(), vec![self.context_vector(w).to_vec()]));
        SenseVectors::from_entries(self.dim, entries).expect("model rows are consistent")
    }

    pub fn write_text<W: Write>(&self, vocab: &Vocabulary, out: W) -> std::io::Result<()> {
        self.sense_vectors(vocab).write_text(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_bounds_and_zero_context() {
        let m = SenseModel::new(30, 50, DEFAULT_LEARNING_RATE, 1).unwrap();
        assert!(m.input.iter().all(|c| c.abs() <= 0.01));
        assert!(m.context.iter().all(|&c| c == 0.0));
        assert!(m.input_acc.iter().chain(&m.context_acc).all(|&c| c == 0.0));
        assert_eq!(m.parameter_count(), 50 * (30 + 30));
        assert!(m.input.iter().any(|&c| c != 0.0));
    }

    #[test]
    fn init_is_deterministic() {
        let a = SenseModel::new(10, 8, 0.025, 42).unwrap();
        let b = SenseModel::new(10, 8, 0.025, 42).unwrap();
        let c = SenseModel::new(10, 8, 0.025, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(SenseModel::new(10, 0, 0.025, 1).is_err());
    }

    #[test]
    fn add_sense_grows_parameter_count() {
        let mut m = SenseModel::new(3, 4, 0.025, 0).unwrap();
        let v = [1.0, 2.0, 3.0, 4.0];
        let s = m.add_sense(1, 0, &v).unwrap();
        assert_eq!(s, 1);
        assert_eq!(m.sense_count(1), 2);
        assert_eq!(m.input_vector(1, 1), &v);
        assert_eq!(m.parameter_count(), 4 * (4 + 3));
        assert!(m.add_sense(1, 5, &v).is_err());
        assert!(matches!(m.row_of(2, 1), Err(Error::Invariant(_))));
    }
}
