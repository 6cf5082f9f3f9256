use crate::embeddings::SenseVectors;
use crate::error::{Error, Result};
use crate::math::cosine;

/// Lower clamp on `1 − sim` in the sense probability.
pub const PROBABILITY_CLAMP: f64 = 1e-6;

/// A word pair presented in sentential context. Contexts hold normalized
/// tokens; `target` is the position of the marked word, if it survived
/// normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextualPair {
    pub word1: String,
    pub word2: String,
    pub context1: Vec<String>,
    pub target1: Option<usize>,
    pub context2: Vec<String>,
    pub target2: Option<usize>,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlainPair {
    pub word1: String,
    pub word2: String,
    pub score: f64,
}

fn lookup(vectors: &SenseVectors, word: &str) -> Result<usize> {
    vectors.id(word).ok_or_else(|| Error::UnknownToken(word.to_string()))
}

/// In-vocabulary ids of `tokens`, skipping position `exclude`.
pub fn context_ids(vectors: &SenseVectors, tokens: &[String], exclude: Option<usize>) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != exclude)
        .filter_map(|(_, t)| vectors.id(t))
        .collect()
}

/// Average cosine between `x` and every sense of every context word.
pub fn sim_sense_context(vectors: &SenseVectors, x: &[f64], context: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    let mut z = 0usize;
    for &y in context {
        for v in vectors.senses(y) {
            total += cosine(x, v);
            z += 1;
        }
    }
    if z == 0 {
        return Err(Error::Unscorable);
    }
    Ok(total / z as f64)
}

fn context_sims(vectors: &SenseVectors, word: usize, context: &[usize]) -> Result<Vec<f64>> {
    vectors
        .senses(word)
        .map(|x| sim_sense_context(vectors, x, context))
        .collect()
}

/// Sense of `word` most similar to the context; ties go to the lowest index.
pub fn best_sense(vectors: &SenseVectors, word: usize, context: &[usize]) -> Result<usize> {
    let sims = context_sims(vectors, word, context)?;
    let mut best = 0;
    for (i, &s) in sims.iter().enumerate() {
        if s > sims[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Probability of each sense of `word` given the context, proportional to
/// `1 / max(1 − sim, PROBABILITY_CLAMP)`.
pub fn sense_probabilities(vectors: &SenseVectors, word: usize, context: &[usize]) -> Result<Vec<f64>> {
    let weights: Vec<f64> = context_sims(vectors, word, context)?
        .into_iter()
        .map(|s| 1.0 / (1.0 - s).max(PROBABILITY_CLAMP))
        .collect();
    let n: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / n).collect())
}

fn pair_contexts(vectors: &SenseVectors, pair: &ContextualPair) -> Result<(usize, usize, Vec<usize>, Vec<usize>)> {
    let w1 = lookup(vectors, &pair.word1)?;
    let w2 = lookup(vectors, &pair.word2)?;
    let c1 = context_ids(vectors, &pair.context1, pair.target1);
    let c2 = context_ids(vectors, &pair.context2, pair.target2);
    Ok((w1, w2, c1, c2))
}

/// Cosine between the context-selected senses of the two words.
pub fn max_sim_c(vectors: &SenseVectors, pair: &ContextualPair) -> Result<f64> {
    let (w1, w2, c1, c2) = pair_contexts(vectors, pair)?;
    let s1 = best_sense(vectors, w1, &c1)?;
    let s2 = best_sense(vectors, w2, &c2)?;
    Ok(cosine(vectors.sense(w1, s1), vectors.sense(w2, s2)))
}

/// Probability-weighted mean cosine over all sense pairs.
pub fn avg_sim_c(vectors: &SenseVectors, pair: &ContextualPair) -> Result<f64> {
    let (w1, w2, c1, c2) = pair_contexts(vectors, pair)?;
    let p1 = sense_probabilities(vectors, w1, &c1)?;
    let p2 = sense_probabilities(vectors, w2, &c2)?;
    let mut total = 0.0;
    for (a, x) in p1.iter().zip(vectors.senses(w1)) {
        for (b, y) in p2.iter().zip(vectors.senses(w2)) {
            total += a * b * cosine(x, y);
        }
    }
    Ok(total)
}

/// Unweighted mean cosine over all sense pairs.
pub fn avg_sim(vectors: &SenseVectors, word1: &str, word2: &str) -> Result<f64> {
    let w1 = lookup(vectors, word1)?;
    let w2 = lookup(vectors, word2)?;
    let mut total = 0.0;
    for x in vectors.senses(w1) {
        for y in vectors.senses(w2) {
            total += cosine(x, y);
        }
    }
    Ok(total / (vectors.sense_count(w1) * vectors.sense_count(w2)) as f64)
}
