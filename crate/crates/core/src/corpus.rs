//! Corpus ingestion: token normalization, vocabulary construction,
//! frequency sub-sampling and materialized context windows.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type WordId = u32;
pub type SenseId = u32;

/// Lowercases `raw`, or rejects it when it contains a numeric character or
/// has no alphabetic character at all.
pub fn normalize_token(raw: &str) -> Option<String> {
    if raw.chars().any(char::is_numeric) || !raw.chars().any(char::is_alphabetic) {
        return None;
    }
    Some(raw.to_lowercase())
}

/// Normalized tokens of one line.
pub fn tokenize(line: &str) -> impl Iterator<Item = String> + '_ {
    line.split_whitespace().filter_map(normalize_token)
}

/// Words kept after frequency filtering, densely numbered by descending
/// frequency.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, WordId>,
    total_tokens: u64,
}

impl Vocabulary {
    /// Builds a vocabulary from `(token, count)` pairs that are already in
    /// the desired id order.
    pub fn from_entries(entries: Vec<(String, u64)>) -> Result<Self> {
        let mut words = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        let mut total_tokens = 0u64;
        for (word, count) in entries {
            if count == 0 {
                return Err(Error::Invariant(format!("word `{word}` has zero frequency")));
            }
            let id = words.len() as WordId;
            if index.insert(word.clone(), id).is_some() {
                return Err(Error::Invariant(format!("duplicate vocabulary entry `{word}`")));
            }
            total_tokens += count;
            words.push(word);
            counts.push(count);
        }
        Ok(Vocabulary {
            words,
            counts,
            index,
            total_tokens,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<WordId> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: WordId) -> &str {
        &self.words[id as usize]
    }

    pub fn count(&self, id: WordId) -> u64 {
        self.counts[id as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn iter(&self) -> impl Iterator<Item = (WordId, &str, u64)> + '_ {
        self.words
            .iter()
            .zip(&self.counts)
            .enumerate()
            .map(|(i, (w, &c))| (i as WordId, w.as_str(), c))
    }

    /// Writes `token<TAB>frequency` lines in id order.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (_, word, count) in self.iter() {
            writeln!(out, "{word}\t{count}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R, origin: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let (word, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::format(origin, i + 1, "expected token<TAB>frequency"))?;
            let count: u64 = count
                .trim()
                .parse()
                .map_err(|_| Error::format(origin, i + 1, format!("bad frequency `{count}`")))?;
            entries.push((word.to_string(), count));
        }
        Self::from_entries(entries)
    }
}

/// Counts normalized tokens and keeps those seen at least `min_count` times.
/// Ties in frequency are ordered by first appearance.
pub fn build_vocab<I, S>(lines: I, min_count: u64) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if min_count == 0 {
        return Err(Error::Precondition("min_count must be at least 1".into()));
    }
    let mut counts: HashMap<String, (u64, usize)> = HashMap::new();
    for line in lines {
        for token in tokenize(line.as_ref()) {
            let next = counts.len();
            counts.entry(token).or_insert((0, next)).0 += 1;
        }
    }
    let mut entries: Vec<(String, u64, usize)> = counts
        .into_iter()
        .filter(|(_, (c, _))| *c >= min_count)
        .map(|(w, (c, first))| (w, c, first))
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    Vocabulary::from_entries(entries.into_iter().map(|(w, c, _)| (w, c)).collect())
}

/// Probability of keeping one token of a word with relative frequency
/// `word_freq / total` under sub-sampling parameter `t`.
///
/// Uses the word2vec keep rule `(sqrt(f/t) + 1) * t/f`, clamped to 1.
pub fn keep_probability(word_freq: u64, total: u64, t: f64) -> Result<f64> {
    if total == 0 {
        return Err(Error::Domain("total token count is zero".into()));
    }
    if word_freq == 0 || word_freq > total {
        return Err(Error::Domain(format!(
            "word frequency {word_freq} outside (0, {total}]"
        )));
    }
    if t.is_nan() || t <= 0.0 {
        return Err(Error::Domain(format!("sub-sampling parameter {t} must be > 0")));
    }
    let f = word_freq as f64 / total as f64;
    if f <= t {
        return Ok(1.0);
    }
    Ok((((f / t).sqrt() + 1.0) * (t / f)).min(1.0))
}

/// One center position and its surviving window.
#[derive(Clone, Copy, Debug)]
pub struct Occurrence<'a> {
    pub center: WordId,
    pub sense: SenseId,
    /// Offset into the store's surviving token sequence.
    pub position: usize,
    left: &'a [WordId],
    right: &'a [WordId],
}

impl<'a> Occurrence<'a> {
    /// Occurrence with an explicit context list, detached from any store.
    pub fn with_context(center: WordId, sense: SenseId, context: &'a [WordId]) -> Self {
        Occurrence {
            center,
            sense,
            position: 0,
            left: context,
            right: &[],
        }
    }

    pub fn context(&self) -> impl Iterator<Item = WordId> + Clone + 'a {
        self.left.iter().chain(self.right.iter()).copied()
    }

    pub fn context_len(&self) -> usize {
        self.left.len() + self.right.len()
    }

    pub fn in_context(&self, word: WordId) -> bool {
        self.left.contains(&word) || self.right.contains(&word)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct LineSpan {
    start: u32,
    end: u32,
    source_line: u32,
}

/// Sub-sampled corpus kept in memory so that per-occurrence sense labels
/// persist across training passes.
///
/// Every surviving token of a line with at least two surviving tokens is an
/// occurrence; its context is the surrounding `window` tokens on either side
/// within the same line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OccurrenceStore {
    window: usize,
    tokens: Vec<WordId>,
    senses: Vec<SenseId>,
    token_line: Vec<u32>,
    lines: Vec<LineSpan>,
    word_offsets: Vec<usize>,
    word_positions: Vec<u32>,
}

impl OccurrenceStore {
    /// Builds a store from lines of already-resolved word ids, without
    /// sub-sampling.
    pub fn from_id_lines<I>(lines: I, vocab_len: usize, window: usize) -> Result<Self>
    where
        I: IntoIterator<Item = Vec<WordId>>,
    {
        let mut builder = StoreBuilder::new(window)?;
        for (i, line) in lines.into_iter().enumerate() {
            if let Some(&bad) = line.iter().find(|&&w| w as usize >= vocab_len) {
                return Err(Error::Invariant(format!("word id {bad} outside vocabulary")));
            }
            builder.push_line(&line, i as u32);
        }
        Ok(builder.finish(vocab_len))
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Number of occurrences.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn vocab_len(&self) -> usize {
        self.word_offsets.len() - 1
    }

    pub fn occurrence(&self, position: usize) -> Occurrence<'_> {
        let span = self.lines[self.token_line[position] as usize];
        let (start, end) = (span.start as usize, span.end as usize);
        let lo = position.saturating_sub(self.window).max(start);
        let hi = (position + self.window + 1).min(end);
        Occurrence {
            center: self.tokens[position],
            sense: self.senses[position],
            position,
            left: &self.tokens[lo..position],
            right: &self.tokens[position + 1..hi],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Occurrence<'_>> + '_ {
        (0..self.tokens.len()).map(move |p| self.occurrence(p))
    }

    /// Positions whose center is `word`, ascending.
    pub fn word_positions(&self, word: WordId) -> &[u32] {
        let w = word as usize;
        &self.word_positions[self.word_offsets[w]..self.word_offsets[w + 1]]
    }

    pub fn word_count(&self, word: WordId) -> usize {
        self.word_positions(word).len()
    }

    pub fn sense(&self, position: usize) -> SenseId {
        self.senses[position]
    }

    pub fn set_sense(&mut self, position: usize, sense: SenseId) {
        self.senses[position] = sense;
    }

    /// Index of the input line the occurrence came from.
    pub fn source_line(&self, position: usize) -> usize {
        self.lines[self.token_line[position] as usize].source_line as usize
    }

    /// Resets every sense label to 0.
    pub fn clear_senses(&mut self) {
        self.senses.iter_mut().for_each(|s| *s = 0);
    }
}

struct StoreBuilder {
    window: usize,
    tokens: Vec<WordId>,
    token_line: Vec<u32>,
    lines: Vec<LineSpan>,
}

impl StoreBuilder {
    fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::Precondition("window must be at least 1".into()));
        }
        Ok(StoreBuilder {
            window,
            tokens: Vec::new(),
            token_line: Vec::new(),
            lines: Vec::new(),
        })
    }

    fn push_line(&mut self, ids: &[WordId], source_line: u32) {
        // A lone token has an empty context and yields no occurrence.
        if ids.len() < 2 {
            return;
        }
        let start = self.tokens.len() as u32;
        let line = self.lines.len() as u32;
        self.tokens.extend_from_slice(ids);
        self.token_line.extend(std::iter::repeat_n(line, ids.len()));
        self.lines.push(LineSpan {
            start,
            end: self.tokens.len() as u32,
            source_line,
        });
    }

    fn finish(self, vocab_len: usize) -> OccurrenceStore {
        let mut word_offsets = vec![0usize; vocab_len + 1];
        for &w in &self.tokens {
            word_offsets[w as usize + 1] += 1;
        }
        for i in 0..vocab_len {
            word_offsets[i + 1] += word_offsets[i];
        }
        let mut fill = word_offsets.clone();
        let mut word_positions = vec![0u32; self.tokens.len()];
        for (p, &w) in self.tokens.iter().enumerate() {
            word_positions[fill[w as usize]] = p as u32;
            fill[w as usize] += 1;
        }
        OccurrenceStore {
            window: self.window,
            senses: vec![0; self.tokens.len()],
            tokens: self.tokens,
            token_line: self.token_line,
            lines: self.lines,
            word_offsets,
            word_positions,
        }
    }
}

/// Materializes the occurrences of `lines`.
///
/// Out-of-vocabulary tokens are removed, then each remaining token is kept
/// with its `keep_probability` (pass `t = f64::INFINITY` to disable
/// sub-sampling). Windows are taken over the surviving tokens of each line.
pub fn extract_occurrences<I, S>(
    lines: I,
    vocab: &Vocabulary,
    window: usize,
    t: f64,
    seed: u64,
) -> Result<OccurrenceStore>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let keep: Vec<f64> = if vocab.is_empty() {
        Vec::new()
    } else {
        vocab
            .counts()
            .iter()
            .map(|&c| keep_probability(c, vocab.total_tokens(), t))
            .collect::<Result<_>>()?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut builder = StoreBuilder::new(window)?;
    let mut ids = Vec::new();
    for (i, line) in lines.into_iter().enumerate() {
        ids.clear();
        for token in tokenize(line.as_ref()) {
            let Some(id) = vocab.id(&token) else { continue };
            let p = keep[id as usize];
            if p >= 1.0 || rng.random::<f64>() < p {
                ids.push(id);
            }
        }
        builder.push_line(&ids, i as u32);
    }
    Ok(builder.finish(vocab.len()))
}

/// Streams the lines of several text files in order.
pub fn read_lines<P: AsRef<Path>>(paths: &[P]) -> impl Iterator<Item = Result<String>> + '_ {
    paths.iter().flat_map(|path| {
        let path = path.as_ref();
        let reader = File::open(path).map(BufReader::new);
        let iter: Box<dyn Iterator<Item = Result<String>>> = match reader {
            Ok(r) => Box::new(r.lines().map(move |l| l.map_err(|e| Error::io(path, e)))),
            Err(e) => Box::new(std::iter::once(Err(Error::io(path, e)))),
        };
        iter
    })
}

/// Runs `f` over the lines of `paths`, surfacing the first read error.
pub fn with_lines<P, T, F>(paths: &[P], f: F) -> Result<T>
where
    P: AsRef<Path>,
    F: FnOnce(&mut dyn Iterator<Item = String>) -> Result<T>,
{
    let mut error = None;
    let mut lines = read_lines(paths).map_while(|l| match l {
        Ok(l) => Some(l),
        Err(e) => {
            error = Some(e);
            None
        }
    });
    let out = f(&mut lines)?;
    drop(lines);
    match error {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_token("Apple").as_deref(), Some("apple"));
        assert_eq!(normalize_token("b2b"), None);
        assert_eq!(normalize_token("---"), None);
        assert_eq!(normalize_token("e-mail").as_deref(), Some("e-mail"));
        assert_eq!(normalize_token("Ⅻ"), None);
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(raw in "\\PC{1,12}") {
            if let Some(once) = normalize_token(&raw) {
                prop_assert_eq!(normalize_token(&once), Some(once.clone()));
            }
        }
    }

    #[test]
    fn vocab_counts_and_cutoff() {
        let v = build_vocab(["a a b"], 1).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!((v.word(0), v.count(0)), ("a", 2));
        assert_eq!((v.word(1), v.count(1)), ("b", 1));
        assert_eq!(v.total_tokens(), 3);

        let v = build_vocab(["a a b"], 2).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.total_tokens(), 2);
    }

    #[test]
    fn vocab_ties_follow_first_appearance() {
        let v = build_vocab(["z y x", "x y z"], 1).unwrap();
        let words: Vec<_> = v.iter().map(|(_, w, _)| w).collect();
        assert_eq!(words, ["z", "y", "x"]);
    }

    #[test]
    fn empty_source_gives_empty_vocab() {
        let v = build_vocab(Vec::<String>::new(), 1).unwrap();
        assert!(v.is_empty());
        assert_eq!(v.total_tokens(), 0);
        assert!(build_vocab(["a"], 0).is_err());
    }

    #[test]
    fn vocab_tsv_round_trip() {
        let v = build_vocab(["the cat the dog", "The end"], 1).unwrap();
        let mut buf = Vec::new();
        v.write_tsv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().next(), Some("the\t3"));
        let back = Vocabulary::read_tsv(&buf[..], "mem").unwrap();
        assert_eq!(back, v);
        assert!(matches!(
            Vocabulary::read_tsv(&b"a\tx\n"[..], "mem"),
            Err(Error::Format { line: 1, .. })
        ));
    }

    #[test]
    fn keep_probability_examples() {
        let total = 1_000_000;
        let t = 1e-4;
        // f = t
        assert_eq!(keep_probability(100, total, t).unwrap(), 1.0);
        // f = 100 t
        assert!((keep_probability(10_000, total, t).unwrap() - 0.11).abs() < 1e-12);
        // f = 4 t
        assert!((keep_probability(400, total, t).unwrap() - 0.75).abs() < 1e-12);
        assert!(matches!(keep_probability(1, 0, t), Err(Error::Domain(_))));
        assert_eq!(keep_probability(10, 10, f64::INFINITY).unwrap(), 1.0);
    }

    fn ids(store: &OccurrenceStore, p: usize) -> (WordId, Vec<WordId>) {
        let o = store.occurrence(p);
        (o.center, o.context().collect())
    }

    #[test]
    fn window_enumeration() {
        let vocab = build_vocab(["a b c"], 1).unwrap();
        let store = extract_occurrences(["a b c"], &vocab, 1, f64::INFINITY, 0).unwrap();
        assert_eq!(store.len(), 3);
        let (a, b, c) = (0, 1, 2);
        assert_eq!(ids(&store, 0), (a, vec![b]));
        assert_eq!(ids(&store, 1), (b, vec![a, c]));
        assert_eq!(ids(&store, 2), (c, vec![b]));

        let vocab = build_vocab(["p q r s t"], 1).unwrap();
        let store = extract_occurrences(["p q r s t"], &vocab, 2, f64::INFINITY, 0).unwrap();
        assert_eq!(store.occurrence(2).context_len(), 4);
        assert_eq!(store.occurrence(0).context_len(), 2);
    }

    #[test]
    fn windows_do_not_cross_lines_and_singletons_drop() {
        let lines = ["a b", "c", "d e f"];
        let vocab = build_vocab(lines, 1).unwrap();
        let store = extract_occurrences(lines, &vocab, 5, f64::INFINITY, 0).unwrap();
        assert_eq!(store.len(), 5);
        assert_eq!(store.occurrence(1).context().count(), 1);
        assert_eq!(store.source_line(2), 2);
        let c = vocab.id("c").unwrap();
        assert_eq!(store.word_count(c), 0);
    }

    #[test]
    fn oov_tokens_are_removed_before_windowing() {
        let vocab = Vocabulary::from_entries(vec![("a".into(), 2), ("b".into(), 1)]).unwrap();
        let store = extract_occurrences(["a zz b"], &vocab, 1, f64::INFINITY, 0).unwrap();
        assert_eq!(ids(&store, 0), (0, vec![1]));
    }

    #[test]
    fn extraction_is_deterministic_per_seed() {
        let lines: Vec<String> = (0..200)
            .map(|i| format!("the cat sat on the mat {}", ["dog", "bird", "fish"][i % 3]))
            .collect();
        let vocab = build_vocab(&lines, 1).unwrap();
        let a = extract_occurrences(&lines, &vocab, 3, 1e-2, 7).unwrap();
        let b = extract_occurrences(&lines, &vocab, 3, 1e-2, 7).unwrap();
        assert_eq!(a, b);
        let c = extract_occurrences(&lines, &vocab, 3, 1e-2, 8).unwrap();
        assert_ne!(a, c);
        // sub-sampling actually dropped something
        assert!(a.len() < 1400);
    }

    #[test]
    fn word_index_groups_positions() {
        let lines = ["a b a c", "b a"];
        let vocab = build_vocab(lines, 1).unwrap();
        let store = extract_occurrences(lines, &vocab, 2, f64::INFINITY, 0).unwrap();
        let a = vocab.id("a").unwrap();
        assert_eq!(store.word_positions(a), &[0, 2, 5]);
        for (w, _, count) in vocab.iter() {
            assert!(store.word_count(w) as u64 <= count);
        }
    }

    #[test]
    fn with_lines_reports_missing_file() {
        let err = with_lines(&["/nonexistent/corpus.txt"], |l| Ok(l.count())).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
