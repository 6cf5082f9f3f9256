//! Contextual loss bookkeeping and multi-sense candidate selection.
//!
//! The contextual loss of an occurrence is the positive-pair part of the
//! skip-gram loss averaged over its context,
//! `-(1/|C|) Σ_{j∈C} ln σ(w·c_j)`. Negative samples are left out because
//! their random draws inflate the loss of infrequent words.

use std::io::{BufRead, Write};

use crate::corpus::{Occurrence, SenseId, Vocabulary, WordId};
use crate::error::{Error, Result};
use crate::math::{dot, neg_log_sigmoid, CompensatedSum};
use crate::trainer::SenseModel;

pub fn contextual_loss(model: &SenseModel, occ: &Occurrence<'_>) -> Result<f64> {
    if occ.context_len() == 0 {
        return Err(Error::Precondition("occurrence has an empty context".into()));
    }
    if occ.sense as usize >= model.sense_count(occ.center) {
        return Err(Error::Invariant(format!(
            "sense {} of word {} does not exist",
            occ.sense, occ.center
        )));
    }
    let w = model.input_vector(occ.center, occ.sense);
    let sum: f64 = occ
        .context()
        .map(|j| neg_log_sigmoid(dot(w, model.context_vector(j))))
        .sum();
    Ok(sum / occ.context_len() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossStat {
    sum: CompensatedSum,
    count: u64,
}

impl LossStat {
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sum(&self) -> f64 {
        self.sum.value()
    }

    pub fn average(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum.value() / self.count as f64)
    }
}

/// Per-(word, sense) running sums of contextual loss.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossLedger {
    stats: Vec<Vec<LossStat>>,
}

impl LossLedger {
    pub fn new(vocab_len: usize) -> Self {
        LossLedger {
            stats: vec![vec![LossStat::default()]; vocab_len],
        }
    }

    pub fn for_model(model: &SenseModel) -> Self {
        LossLedger {
            stats: (0..model.vocab_len() as WordId)
                .map(|w| vec![LossStat::default(); model.sense_count(w)])
                .collect(),
        }
    }

    pub fn accumulate(&mut self, word: WordId, sense: SenseId, loss: f64) {
        debug_assert!(loss >= 0.0 && loss.is_finite(), "loss {loss}");
        let w = word as usize;
        if w >= self.stats.len() {
            self.stats.resize_with(w + 1, || vec![LossStat::default()]);
        }
        let senses = &mut self.stats[w];
        if sense as usize >= senses.len() {
            senses.resize(sense as usize + 1, LossStat::default());
        }
        let stat = &mut senses[sense as usize];
        stat.sum.add(loss);
        stat.count += 1;
    }

    pub fn merge(&mut self, other: &LossLedger) {
        if other.stats.len() > self.stats.len() {
            self.stats.resize_with(other.stats.len(), Vec::new);
        }
        for (mine, theirs) in self.stats.iter_mut().zip(&other.stats) {
            if theirs.len() > mine.len() {
                mine.resize(theirs.len(), LossStat::default());
            }
            for (a, b) in mine.iter_mut().zip(theirs) {
                a.sum.merge(&b.sum);
                a.count += b.count;
            }
        }
    }

    pub fn stat(&self, word: WordId, sense: SenseId) -> LossStat {
        self.stats
            .get(word as usize)
            .and_then(|s| s.get(sense as usize))
            .copied()
            .unwrap_or_default()
    }

    pub fn average(&self, word: WordId, sense: SenseId) -> Option<f64> {
        self.stat(word, sense).average()
    }

    pub fn total_count(&self) -> u64 {
        self.stats.iter().flatten().map(|s| s.count).sum()
    }

    /// Average loss over all senses of `word`, weighted by occurrences.
    pub fn word_average(&self, word: WordId) -> Option<f64> {
        let senses = self.stats.get(word as usize)?;
        let mut sum = CompensatedSum::default();
        let mut count = 0;
        for s in senses {
            sum.merge(&s.sum);
            count += s.count;
        }
        (count > 0).then(|| sum.value() / count as f64)
    }

    /// Observed `(word, sense, stat)` triples in id order.
    pub fn entries(&self) -> impl Iterator<Item = (WordId, SenseId, LossStat)> + '_ {
        self.stats.iter().enumerate().flat_map(|(w, senses)| {
            senses
                .iter()
                .enumerate()
                .filter(|(_, s)| s.count > 0)
                .map(move |(s, stat)| (w as WordId, s as SenseId, *stat))
        })
    }

    fn sense_slots(&self, word: WordId) -> usize {
        self.stats.get(word as usize).map_or(0, Vec::len)
    }
}

/// Threshold and frequency gate for multi-sense selection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CandidateFilter {
    pub loss_threshold: f64,
    pub min_freq: u64,
    pub max_freq: u64,
}

/// Corpus size the default frequency gate (50 to 30,000) was tuned for.
pub const REFERENCE_CORPUS_TOKENS: f64 = 62_653_821.0;

impl CandidateFilter {
    pub fn new(loss_threshold: f64, min_freq: u64, max_freq: u64) -> Result<Self> {
        if loss_threshold.is_nan() || loss_threshold <= 0.0 {
            return Err(Error::Config(format!("loss threshold {loss_threshold} must be > 0")));
        }
        if min_freq > max_freq {
            return Err(Error::Config(format!(
                "min_freq {min_freq} exceeds max_freq {max_freq}"
            )));
        }
        Ok(CandidateFilter {
            loss_threshold,
            min_freq,
            max_freq,
        })
    }

    /// Frequency gate 50..=30,000 per 62.65M tokens, scaled linearly.
    pub fn scaled_gate(total_tokens: u64) -> (u64, u64) {
        let scale = total_tokens as f64 / REFERENCE_CORPUS_TOKENS;
        let min = ((50.0 * scale).round() as u64).max(1);
        let max = ((30_000.0 * scale).round() as u64).max(min);
        (min, max)
    }

    pub fn admits_frequency(&self, freq: u64) -> bool {
        (self.min_freq..=self.max_freq).contains(&freq)
    }
}

/// `(word, sense)` pairs whose word frequency passes the gate and whose
/// average contextual loss exceeds the threshold, in id order.
pub fn select_candidates(
    ledger: &LossLedger,
    vocab: &Vocabulary,
    filter: &CandidateFilter,
) -> Vec<(WordId, SenseId)> {
    ledger
        .entries()
        .filter(|&(w, _, _)| (w as usize) < vocab.len() && filter.admits_frequency(vocab.count(w)))
        .filter(|(_, _, stat)| stat.average().is_some_and(|a| a > filter.loss_threshold))
        .map(|(w, s, _)| (w, s))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossReportEntry {
    pub token: String,
    pub word: WordId,
    pub sense: SenseId,
    pub frequency: u64,
    pub average_loss: f64,
}

/// Token label for `(word, sense)`: bare token for single-sense words,
/// `token#s` otherwise.
pub fn sense_label(token: &str, sense: SenseId, sense_count: usize) -> String {
    if sense_count > 1 {
        format!("{token}#{sense}")
    } else {
        token.to_string()
    }
}

/// Observed `(word, sense)` entries sorted ascending by average contextual
/// loss (ties by id).
pub fn loss_report(ledger: &LossLedger, vocab: &Vocabulary) -> Vec<LossReportEntry> {
    let mut report: Vec<LossReportEntry> = ledger
        .entries()
        .filter(|&(w, _, _)| (w as usize) < vocab.len())
        .map(|(w, s, stat)| LossReportEntry {
            token: sense_label(vocab.word(w), s, ledger.sense_slots(w)),
            word: w,
            sense: s,
            frequency: vocab.count(w),
            average_loss: stat.average().expect("entries have observations"),
        })
        .collect();
    report.sort_by(|a, b| {
        a.average_loss
            .total_cmp(&b.average_loss)
            .then(a.word.cmp(&b.word))
            .then(a.sense.cmp(&b.sense))
    });
    report
}

/// `token<TAB>frequency<TAB>avg_loss` lines.
pub fn write_loss_report<W: Write>(report: &[LossReportEntry], mut out: W) -> std::io::Result<()> {
    for e in report {
        writeln!(out, "{}\t{}\t{:.6}", e.token, e.frequency, e.average_loss)?;
    }
    Ok(())
}

/// Parsed loss-report row.
#[derive(Clone, Debug, PartialEq)]
pub struct LossReportRow {
    pub token: String,
    pub frequency: u64,
    pub average_loss: f64,
}

pub fn read_loss_report<R: BufRead>(reader: R, origin: &str) -> Result<Vec<LossReportRow>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::format(origin, i + 1, "expected token<TAB>frequency<TAB>avg_loss"));
        }
        let frequency = fields[1]
            .parse()
            .map_err(|_| Error::format(origin, i + 1, format!("bad frequency `{}`", fields[1])))?;
        let average_loss: f64 = fields[2]
            .parse()
            .map_err(|_| Error::format(origin, i + 1, format!("bad loss `{}`", fields[2])))?;
        if !average_loss.is_finite() {
            return Err(Error::format(origin, i + 1, "loss is not finite"));
        }
        rows.push(LossReportRow {
            token: fields[0].to_string(),
            frequency,
            average_loss,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vocab(entries: &[(&str, u64)]) -> Vocabulary {
        Vocabulary::from_entries(entries.iter().map(|&(w, c)| (w.to_string(), c)).collect()).unwrap()
    }

    /// Model whose center (word 0) has dot product `dots[j]` with context
    /// word `j + 1`.
    fn model_with_dots(dots: &[f64]) -> SenseModel {
        let mut m = SenseModel::new(dots.len() + 1, 2, 0.025, 0).unwrap();
        m.input_vector_mut(0, 0).copy_from_slice(&[1.0, 0.0]);
        for (j, &d) in dots.iter().enumerate() {
            m.context_vector_mut(j as WordId + 1).copy_from_slice(&[d, 0.0]);
        }
        m
    }

    #[test]
    fn contextual_loss_examples() {
        let ctx: Vec<WordId> = (1..=3).collect();
        let m = model_with_dots(&[0.0, 0.0, 0.0]);
        let l = contextual_loss(&m, &Occurrence::with_context(0, 0, &ctx)).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);

        let ctx: Vec<WordId> = (1..=5).collect();
        let m = model_with_dots(&[20.0; 5]);
        let l = contextual_loss(&m, &Occurrence::with_context(0, 0, &ctx)).unwrap();
        assert!((l - 2.061_153_620_314_381e-9).abs() < 1e-20);

        let ctx = [1, 2];
        let m = model_with_dots(&[0.0, 20.0]);
        let l = contextual_loss(&m, &Occurrence::with_context(0, 0, &ctx)).unwrap();
        assert!((l - 0.346_573_591_310_549_46).abs() < 1e-15);
    }

    #[test]
    fn contextual_loss_rejects_empty_context() {
        let m = model_with_dots(&[0.0]);
        let r = contextual_loss(&m, &Occurrence::with_context(0, 0, &[]));
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    proptest! {
        #[test]
        fn contextual_loss_ignores_context_order(dots in prop::collection::vec(-5.0f64..5.0, 1..8), seed in 0u64..1000) {
            let m = model_with_dots(&dots);
            let ctx: Vec<WordId> = (1..=dots.len() as WordId).collect();
            let mut shuffled = ctx.clone();
            use rand::seq::SliceRandom;
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let a = contextual_loss(&m, &Occurrence::with_context(0, 0, &ctx)).unwrap();
            let b = contextual_loss(&m, &Occurrence::with_context(0, 0, &shuffled)).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn contextual_loss_decreases_when_a_score_rises(dots in prop::collection::vec(-5.0f64..5.0, 1..8), idx in 0usize..8, bump in 0.01f64..3.0) {
            let idx = idx % dots.len();
            let ctx: Vec<WordId> = (1..=dots.len() as WordId).collect();
            let before = contextual_loss(&model_with_dots(&dots), &Occurrence::with_context(0, 0, &ctx)).unwrap();
            let mut raised = dots.clone();
            raised[idx] += bump;
            let after = contextual_loss(&model_with_dots(&raised), &Occurrence::with_context(0, 0, &ctx)).unwrap();
            prop_assert!(after < before);
        }
    }

    #[test]
    fn ledger_averages() {
        let mut l = LossLedger::new(2);
        l.accumulate(0, 0, 0.7);
        assert_eq!(l.average(0, 0), Some(0.7));
        l.accumulate(1, 0, 0.5);
        l.accumulate(1, 0, 1.5);
        assert_eq!(l.average(1, 0), Some(1.0));
        assert_eq!(l.average(1, 3), None);
        l.accumulate(1, 2, 3.0);
        assert_eq!(l.average(1, 2), Some(3.0));
        assert_eq!(l.word_average(1), Some(5.0 / 3.0));
    }

    /// Exact sum of doubles via Shewchuk's non-overlapping partials.
    fn exact_sum(xs: &[f64]) -> f64 {
        let mut partials: Vec<f64> = Vec::new();
        for &x in xs {
            let mut x = x;
            let mut i = 0;
            for j in 0..partials.len() {
                let mut y = partials[j];
                if x.abs() < y.abs() {
                    std::mem::swap(&mut x, &mut y);
                }
                let hi = x + y;
                let lo = y - (hi - x);
                if lo != 0.0 {
                    partials[i] = lo;
                    i += 1;
                }
                x = hi;
            }
            partials.truncate(i);
            partials.push(x);
        }
        partials.iter().rev().sum()
    }

    #[test]
    fn ledger_average_matches_exact_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let losses: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>() * 10.0f64.powi(rng.random_range(-6..2))).collect();
        let mut l = LossLedger::new(1);
        for &x in &losses {
            l.accumulate(0, 0, x);
        }
        let expected = exact_sum(&losses) / losses.len() as f64;
        let got = l.average(0, 0).unwrap();
        assert!(((got - expected) / expected).abs() < 1e-9);
    }

    #[test]
    fn merged_shards_equal_single_ledger() {
        let mut whole = LossLedger::new(3);
        let mut a = LossLedger::new(3);
        let mut b = LossLedger::new(3);
        for i in 0..30u32 {
            let (w, s, x) = (i % 3, i % 2, 0.1 * i as f64);
            whole.accumulate(w, s, x);
            if i % 4 == 0 { a.accumulate(w, s, x) } else { b.accumulate(w, s, x) }
        }
        a.merge(&b);
        for (w, s, stat) in whole.entries() {
            assert_eq!(a.stat(w, s).count(), stat.count());
            assert!((a.stat(w, s).sum() - stat.sum()).abs() < 1e-12);
        }
    }

    #[test]
    fn report_sorted_ascending_and_skips_unobserved() {
        let v = vocab(&[("a", 10), ("b", 5), ("c", 3)]);
        let mut l = LossLedger::new(3);
        l.accumulate(0, 0, 0.9);
        l.accumulate(1, 0, 0.2);
        let r = loss_report(&l, &v);
        let avgs: Vec<f64> = r.iter().map(|e| e.average_loss).collect();
        assert_eq!(avgs, [0.2, 0.9]);
        assert_eq!(r[0].token, "b");
        assert_eq!(loss_report(&l, &v), r);

        let mut buf = Vec::new();
        write_loss_report(&r, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "b\t5\t0.200000\na\t10\t0.900000\n");
        let rows = read_loss_report(&buf[..], "mem").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].token, "a");
    }

    #[test]
    fn report_labels_split_senses() {
        let v = vocab(&[("bat", 10)]);
        let mut l = LossLedger::new(1);
        l.accumulate(0, 0, 1.0);
        l.accumulate(0, 1, 2.0);
        let r = loss_report(&l, &v);
        assert_eq!(r[0].token, "bat#0");
        assert_eq!(r[1].token, "bat#1");
    }

    #[test]
    fn selection_rules() {
        let v = vocab(&[("a", 1000), ("b", 900), ("c", 10)]);
        let mut l = LossLedger::new(3);
        l.accumulate(0, 0, 2.3);
        l.accumulate(1, 0, 2.0);
        l.accumulate(2, 0, 2.4);
        let f = CandidateFilter::new(2.15, 100, 5000).unwrap();
        assert_eq!(select_candidates(&l, &v, &f), vec![(0, 0)]);

        // all below threshold
        let f = CandidateFilter::new(2.5, 1, 5000).unwrap();
        assert!(select_candidates(&l, &v, &f).is_empty());

        // infrequent word with high loss is gated out
        let mut l2 = LossLedger::new(3);
        l2.accumulate(2, 0, 3.0);
        let f = CandidateFilter::new(2.15, 50, 5000).unwrap();
        assert!(select_candidates(&l2, &v, &f).is_empty());
    }

    #[test]
    fn split_senses_are_selected_individually() {
        let v = vocab(&[("a", 1000)]);
        let mut l = LossLedger::new(1);
        l.accumulate(0, 0, 1.0);
        l.accumulate(0, 1, 3.0);
        let f = CandidateFilter::new(2.0, 1, 5000).unwrap();
        assert_eq!(select_candidates(&l, &v, &f), vec![(0, 1)]);
    }

    proptest! {
        #[test]
        fn raising_threshold_never_grows_selection(losses in prop::collection::vec(0.0f64..4.0, 1..40), t1 in 0.01f64..4.0, dt in 0.0f64..2.0) {
            let entries: Vec<(String, u64)> = (0..losses.len()).map(|i| (format!("w{}", char::from(b'a' + (i % 26) as u8)).repeat(i / 26 + 1), 100 + i as u64)).collect();
            let v = Vocabulary::from_entries(entries).unwrap();
            let mut l = LossLedger::new(losses.len());
            for (w, &x) in losses.iter().enumerate() {
                l.accumulate(w as WordId, 0, x);
            }
            let low = select_candidates(&l, &v, &CandidateFilter::new(t1, 110, 130).unwrap());
            let high = select_candidates(&l, &v, &CandidateFilter::new(t1 + dt, 110, 130).unwrap());
            prop_assert!(high.iter().all(|c| low.contains(c)));
            prop_assert!(low.iter().all(|&(w, _)| (110..=130).contains(&v.count(w))));
        }
    }

    #[test]
    fn filter_validation_and_scaling() {
        assert!(CandidateFilter::new(0.0, 1, 2).is_err());
        assert!(CandidateFilter::new(2.0, 3, 2).is_err());
        assert_eq!(CandidateFilter::scaled_gate(62_653_821), (50, 30_000));
        assert_eq!(CandidateFilter::scaled_gate(0), (1, 1));
    }
}
