//! Two-topic synthetic corpus with merged pseudo-words, for checking sense
//! recovery against known ground truth.
//!
//! Each line is drawn from one topic: tokens are i.i.d. from that topic's
//! Zipf distribution, and the two topic vocabularies are disjoint. A pseudo
//! word replaces one word of each topic at the same frequency rank, so its
//! occurrences come from two unrelated context distributions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub lines: usize,
    pub line_len: usize,
    /// Words per topic.
    pub topic_vocab: usize,
    pub zipf_exponent: f64,
    pub pseudo_pairs: usize,
    /// 0-based rank of the first merged pair; later pairs follow every
    /// `pseudo_stride` ranks.
    pub first_pseudo_rank: usize,
    pub pseudo_stride: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    /// About 2M tokens.
    fn default() -> Self {
        SyntheticConfig {
            lines: 100_000,
            line_len: 20,
            topic_vocab: 500,
            zipf_exponent: 1.0,
            pseudo_pairs: 20,
            first_pseudo_rank: 20,
            pseudo_stride: 10,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseudoWord {
    pub token: String,
    /// The source word of each topic that it replaced.
    pub sources: [String; 2],
    pub rank: usize,
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub lines: Vec<String>,
    /// Topic (0 or 1) of each line.
    pub topics: Vec<u8>,
    pub pseudo: Vec<PseudoWord>,
    /// Surface words of each topic after merging, by rank.
    pub topic_words: [Vec<String>; 2],
}

impl SyntheticCorpus {
    pub fn token_count(&self) -> usize {
        self.lines.iter().map(|l| l.split_whitespace().count()).sum()
    }

    pub fn is_pseudo(&self, token: &str) -> bool {
        self.pseudo.iter().any(|p| p.token == token)
    }
}

/// Lowercase base-26 spelling of `n` (a, b, ..., z, ba, bb, ...).
fn letters(mut n: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'a' + (n % 26) as u8);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticCorpus> {
    let last = config.first_pseudo_rank + config.pseudo_pairs.saturating_sub(1) * config.pseudo_stride;
    if config.topic_vocab == 0 || config.line_len < 2 || (config.pseudo_pairs > 0 && last >= config.topic_vocab) {
        return Err(Error::Config(format!(
            "synthetic corpus: {} pseudo pairs from rank {} every {} do not fit {} topic words",
            config.pseudo_pairs, config.first_pseudo_rank, config.pseudo_stride, config.topic_vocab
        )));
    }
    let mut topic_words: [Vec<String>; 2] = [
        (0..config.topic_vocab).map(|i| format!("al{}", letters(i))).collect(),
        (0..config.topic_vocab).map(|i| format!("be{}", letters(i))).collect(),
    ];
    let mut pseudo = Vec::with_capacity(config.pseudo_pairs);
    for k in 0..config.pseudo_pairs {
        let rank = config.first_pseudo_rank + k * config.pseudo_stride;
        let token = format!("px{}", letters(k));
        let sources = [
            std::mem::replace(&mut topic_words[0][rank], token.clone()),
            std::mem::replace(&mut topic_words[1][rank], token.clone()),
        ];
        pseudo.push(PseudoWord { token, sources, rank });
    }

    let mut cumulative = Vec::with_capacity(config.topic_vocab);
    let mut acc = 0.0;
    for r in 0..config.topic_vocab {
        acc += 1.0 / ((r + 1) as f64).powf(config.zipf_exponent);
        cumulative.push(acc);
    }
    let total = acc;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut lines = Vec::with_capacity(config.lines);
    let mut topics = Vec::with_capacity(config.lines);
    for _ in 0..config.lines {
        let topic = rng.random_range(0..2u8);
        let words = &topic_words[topic as usize];
        let mut line = String::with_capacity(config.line_len * 6);
        for i in 0..config.line_len {
            let u = rng.random::<f64>() * total;
            let r = cumulative.partition_point(|&c| c <= u).min(config.topic_vocab - 1);
            if i > 0 {
                line.push(' ');
            }
            line.push_str(&words[r]);
        }
        lines.push(line);
        topics.push(topic);
    }
    Ok(SyntheticCorpus {
        lines,
        topics,
        pseudo,
        topic_words,
    })
}
