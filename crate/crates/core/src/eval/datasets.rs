//! Loaders for contextual (SCWS-style) and plain (WordSim-style) similarity
//! datasets.

use std::io::BufRead;
use std::path::Path;

use super::similarity::{ContextualPair, PlainPair};
use crate::corpus::normalize_token;
use crate::error::{Error, Result};

const OPEN: &str = "<b>";
const CLOSE: &str = "</b>";

/// Normalized context tokens plus the position of the `<b>`-marked target.
fn parse_context(raw: &str, origin: &str, line: usize) -> Result<(Vec<String>, Option<usize>)> {
    if !raw.contains(OPEN) {
        return Err(Error::format(origin, line, "context without a <b> target marker"));
    }
    let spaced = raw.replace(OPEN, " \u{1} ").replace(CLOSE, " ");
    let mut tokens = Vec::new();
    let mut target = None;
    let mut marked = false;
    for t in spaced.split_whitespace() {
        if t == "\u{1}" {
            marked = true;
            continue;
        }
        let normalized = normalize_token(t);
        if marked {
            marked = false;
            if target.is_none() {
                target = normalized.as_ref().map(|_| tokens.len());
            }
        }
        if let Some(n) = normalized {
            tokens.push(n);
        }
    }
    Ok((tokens, target))
}

fn parse_score(field: &str, origin: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::format(origin, line, format!("bad score `{}`", field.trim())))
}

fn target_word(raw: &str) -> String {
    normalize_token(raw.trim()).unwrap_or_else(|| raw.trim().to_lowercase())
}

/// Tab-separated records: id, word1, POS1, word2, POS2, context1, context2,
/// mean rating, individual ratings.
pub fn read_scws<R: BufRead>(reader: R, origin: &str) -> Result<Vec<ContextualPair>> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let n = i + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 8 {
            return Err(Error::format(origin, n, format!("expected at least 8 tab-separated fields, found {}", fields.len())));
        }
        let (context1, target1) = parse_context(fields[5], origin, n)?;
        let (context2, target2) = parse_context(fields[6], origin, n)?;
        pairs.push(ContextualPair {
            word1: target_word(fields[1]),
            word2: target_word(fields[3]),
            context1,
            target1,
            context2,
            target2,
            score: parse_score(fields[7], origin, n)?,
        });
    }
    Ok(pairs)
}

/// `word1,word2,score` or tab-separated; a first line whose score does not
/// parse is taken as a header.
pub fn read_wordsim<R: BufRead>(reader: R, origin: &str) -> Result<Vec<PlainPair>> {
    let mut pairs = Vec::new();
    let mut first = true;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let header_allowed = std::mem::replace(&mut first, false);
        let fields: Vec<&str> = line.split([',', '\t']).collect();
        if fields.len() < 3 {
            if header_allowed {
                continue;
            }
            return Err(Error::format(origin, i + 1, "expected `word1,word2,score`"));
        }
        let score = match parse_score(fields[2], origin, i + 1) {
            Ok(s) => s,
            Err(_) if header_allowed => continue,
            Err(e) => return Err(e),
        };
        pairs.push(PlainPair {
            word1: target_word(fields[0]),
            word2: target_word(fields[1]),
            score,
        });
    }
    Ok(pairs)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Dataset {
    Contextual(Vec<ContextualPair>),
    Plain(Vec<PlainPair>),
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Contextual(p) => p.len(),
            Dataset::Plain(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Loads a dataset file, treating it as contextual when any line carries a
/// `<b>` marker.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    if text.contains(OPEN) {
        read_scws(text.as_bytes(), &origin).map(Dataset::Contextual)
    } else {
        read_wordsim(text.as_bytes(), &origin).map(Dataset::Plain)
    }
}
