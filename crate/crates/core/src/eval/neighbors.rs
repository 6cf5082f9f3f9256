use std::cmp::Ordering;

use crate::embeddings::SenseVectors;
use crate::error::{Error, Result};
use crate::math::cosine;

#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub label: String,
    pub word: usize,
    pub sense: usize,
    pub cosine: f64,
}

/// The `top_k` sense vectors closest to `token#sense` by cosine, excluding
/// every sense of the query word. Descending by cosine; ties by token, then
/// sense.
pub fn nearest_neighbors(vectors: &SenseVectors, token: &str, sense: usize, top_k: usize) -> Result<Vec<Neighbor>> {
    let id = vectors.id(token).ok_or_else(|| Error::UnknownToken(token.to_string()))?;
    if sense >= vectors.sense_count(id) {
        return Err(Error::UnknownToken(format!("{token}#{sense}")));
    }
    let query = vectors.sense(id, sense);
    let mut all: Vec<(f64, usize, usize)> = Vec::with_capacity(vectors.entry_count());
    for w in (0..vectors.len()).filter(|&w| w != id) {
        for (s, v) in vectors.senses(w).enumerate() {
            all.push((cosine(query, v), w, s));
        }
    }
    let order = |a: &(f64, usize, usize), b: &(f64, usize, usize)| -> Ordering {
        b.0.total_cmp(&a.0)
            .then_with(|| vectors.word(a.1).cmp(vectors.word(b.1)))
            .then(a.2.cmp(&b.2))
    };
    if top_k < all.len() && top_k > 0 {
        all.select_nth_unstable_by(top_k - 1, order);
        all.truncate(top_k);
    }
    all.truncate(top_k);
    all.sort_by(order);
    Ok(all
        .into_iter()
        .map(|(c, w, s)| Neighbor {
            label: vectors.label(w, s),
            word: w,
            sense: s,
            cosine: c,
        })
        .collect())
}
