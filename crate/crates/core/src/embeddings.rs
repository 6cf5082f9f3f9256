//! Read-only sense vectors keyed by surface token, and the text model format.
//!
//! The text format has a header `entry_count d`, followed by one line per
//! (word, sense): `token#s v1 ... vd`. The `#s` suffix is omitted for words
//! with a single sense.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::loss::sense_label;
use crate::math::norm;

#[derive(Clone, Debug, PartialEq)]
pub struct SenseVectors {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    /// `offsets[w]..offsets[w + 1]` are the sense rows of word `w`
    offsets: Vec<usize>,
    data: Vec<f64>,
    norms: Vec<f64>,
}

impl SenseVectors {
    pub fn from_entries<I>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<Vec<f64>>)>,
    {
        if dim == 0 {
            return Err(Error::Invariant("vector dimension must be at least 1".into()));
        }
        let mut out = SenseVectors {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            offsets: vec![0],
            data: Vec::new(),
            norms: Vec::new(),
        };
        for (word, senses) in entries {
            if senses.is_empty() {
                return Err(Error::Invariant(format!("word `{word}` has no senses")));
            }
            if out.index.insert(word.clone(), out.words.len()).is_some() {
                return Err(Error::Invariant(format!("duplicate word `{word}`")));
            }
            for v in senses {
                if v.len() != dim {
                    return Err(Error::Invariant(format!(
                        "`{word}` has a {}-dimensional vector, expected {dim}",
                        v.len()
                    )));
                }
                out.norms.push(norm(&v));
                out.data.extend_from_slice(&v);
            }
            out.words.push(word);
            out.offsets.push(out.norms.len());
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn entry_count(&self) -> usize {
        self.norms.len()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn sense_count(&self, id: usize) -> usize {
        self.offsets[id + 1] - self.offsets[id]
    }

    pub fn sense(&self, id: usize, sense: usize) -> &[f64] {
        let row = self.offsets[id] + sense;
        debug_assert!(row < self.offsets[id + 1]);
        self.row(row)
    }

    pub fn senses(&self, id: usize) -> impl Iterator<Item = &[f64]> + '_ {
        (self.offsets[id]..self.offsets[id + 1]).map(move |r| self.row(r))
    }

    pub(crate) fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn label(&self, id: usize, sense: usize) -> String {
        sense_label(&self.words[id], sense as u32, self.sense_count(id))
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.entry_count(), self.dim)?;
        let mut line = String::new();
        for id in 0..self.len() {
            for s in 0..self.sense_count(id) {
                line.clear();
                line.push_str(&self.label(id, s));
                for x in self.sense(id, s) {
                    use std::fmt::Write as _;
                    let _ = write!(line, " {x}");
                }
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(reader: R, origin: &str) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (count, dim) = match lines.next() {
            Some((_, line)) => {
                let line = line.map_err(|e| Error::io(origin, e))?;
                let mut parts = line.split_whitespace();
                let parse = |p: Option<&str>| p.and_then(|x| x.parse::<usize>().ok());
                match (parse(parts.next()), parse(parts.next()), parts.next()) {
                    (Some(c), Some(d), None) if d > 0 => (c, d),
                    _ => return Err(Error::format(origin, 1, "expected header `entry_count d`")),
                }
            }
            None => return Err(Error::format(origin, 1, "empty model file")),
        };

        struct Raw {
            token: String,
            line: usize,
            vector: Vec<f64>,
        }
        let mut raw = Vec::with_capacity(count);
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().unwrap().to_string();
            let vector = parts
                .map(|p| {
                    p.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::format(origin, i + 1, format!("bad component `{p}`")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if vector.len() != dim {
                return Err(Error::format(
                    origin,
                    i + 1,
                    format!("expected {dim} components, found {}", vector.len()),
                ));
            }
            raw.push(Raw {
                token,
                line: i + 1,
                vector,
            });
        }
        if raw.len() != count {
            return Err(Error::format(
                origin,
                1,
                format!("header announces {count} entries, found {}", raw.len()),
            ));
        }

        // Group `base#s` entries; a base whose suffixes are not exactly
        // 0..m (m >= 2) is treated as a set of literal tokens.
        let split = |t: &str| -> Option<(String, usize)> {
            let (base, suffix) = t.rsplit_once('#')?;
            if base.is_empty() || suffix.is_empty() || !suffix.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            Some((base.to_string(), suffix.parse().ok()?))
        };
        let mut groups: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
        for (k, r) in raw.iter().enumerate() {
            if let Some((base, s)) = split(&r.token) {
                groups.entry(base).or_default().push((s, k));
            }
        }
        let mut multi: HashMap<usize, (String, usize)> = HashMap::new();
        for (base, mut senses) in groups {
            senses.sort();
            let contiguous = senses.len() >= 2 && senses.iter().enumerate().all(|(i, &(s, _))| s == i);
            if contiguous {
                for &(s, k) in &senses {
                    multi.insert(k, (base.clone(), s));
                }
            }
        }

        let mut order: Vec<String> = Vec::new();
        let mut senses: HashMap<String, Vec<Option<Vec<f64>>>> = HashMap::new();
        for (k, r) in raw.into_iter().enumerate() {
            let (word, s) = multi.remove(&k).unwrap_or((r.token, 0));
            let slot = senses.entry(word.clone()).or_insert_with(|| {
                order.push(word.clone());
                Vec::new()
            });
            if slot.len() <= s {
                slot.resize(s + 1, None);
            }
            if slot[s].is_some() {
                return Err(Error::format(origin, r.line, format!("duplicate entry for `{word}`")));
            }
            slot[s] = Some(r.vector);
        }
        let entries: Vec<(String, Vec<Vec<f64>>)> = order
            .into_iter()
            .map(|w| {
                let v = senses.remove(&w).unwrap();
                (w, v.into_iter().map(Option::unwrap).collect())
            })
            .collect();
        Self::from_entries(dim, entries)
    }
}
