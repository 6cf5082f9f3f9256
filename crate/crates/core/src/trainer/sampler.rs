use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Occurrence, WordId};
use crate::error::{Error, Result};

/// Exponent applied to unigram counts for the noise distribution.
pub const NOISE_EXPONENT: f64 = 0.75;

/// Give up on a negative after this many rejected draws.
const MAX_REJECTIONS: usize = 64;

/// Cumulative distribution proportional to `count^alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnigramTable {
    cumulative: Vec<f64>,
}

impl UnigramTable {
    pub fn new(counts: &[u64], alpha: f64) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Precondition("noise table over an empty vocabulary".into()));
        }
        let mut cumulative = Vec::with_capacity(counts.len());
        let mut acc = 0.0;
        for &c in counts {
            acc += (c as f64).powf(alpha);
            cumulative.push(acc);
        }
        if acc.is_nan() || acc <= 0.0 {
            return Err(Error::Precondition("noise table has zero mass".into()));
        }
        for c in &mut cumulative {
            *c /= acc;
        }
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(UnigramTable { cumulative })
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn probability(&self, word: WordId) -> f64 {
        let w = word as usize;
        let lo = if w == 0 { 0.0 } else { self.cumulative[w - 1] };
        self.cumulative[w] - lo
    }

    /// Maps a uniform draw in `[0, 1)` to a word.
    pub fn lookup(&self, u: f64) -> WordId {
        let idx = self.cumulative.partition_point(|&c| c <= u);
        idx.min(self.cumulative.len() - 1) as WordId
    }
}

/// Draws negative words for skip-gram updates.
#[derive(Clone, Debug)]
pub struct NegativeSampler {
    table: Arc<UnigramTable>,
    per_positive: usize,
    rng: ChaCha8Rng,
}

impl NegativeSampler {
    pub fn new(counts: &[u64], per_positive: usize, seed: u64) -> Result<Self> {
        Ok(NegativeSampler {
            table: Arc::new(UnigramTable::new(counts, NOISE_EXPONENT)?),
            per_positive,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn per_positive(&self) -> usize {
        self.per_positive
    }

    pub fn table(&self) -> &UnigramTable {
        &self.table
    }

    pub fn sample(&mut self) -> WordId {
        let u: f64 = self.rng.random();
        self.table.lookup(u)
    }

    /// Fills `out` with `per_positive` negatives for every context word,
    /// rejecting the center and any context member.
    pub fn draw_for(&mut self, occ: &Occurrence<'_>, out: &mut Vec<WordId>) {
        out.clear();
        let wanted = self.per_positive * occ.context_len();
        for _ in 0..wanted {
            for _ in 0..MAX_REJECTIONS {
                let k = self.sample();
                if k != occ.center && !occ.in_context(k) {
                    out.push(k);
                    break;
                }
            }
        }
    }

    /// Independent sampler sharing the same table, for one worker shard.
    pub fn fork(&mut self) -> NegativeSampler {
        let seed: u64 = self.rng.random();
        NegativeSampler {
            table: Arc::clone(&self.table),
            per_positive: self.per_positive,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}
