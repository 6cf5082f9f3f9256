use crate::corpus::{Occurrence, WordId};
use crate::math::{axpy, norm};
use crate::trainer::SenseModel;

/// Mean of the L2-normalized vectors; zero-norm inputs are skipped and do
/// not count towards the divisor. `None` when every input is zero.
///
/// With this scaling, `⟨c_u, c_v⟩` is the average pairwise cosine between
/// the two context sets.
pub fn composite_of<'a, I>(dim: usize, vectors: I) -> Option<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc = vec![0.0; dim];
    let mut used = 0usize;
    for v in vectors {
        let n = norm(v);
        if n > 0.0 {
            acc.iter_mut().zip(v).for_each(|(a, x)| *a += x / n);
            used += 1;
        }
    }
    if used == 0 {
        return None;
    }
    let used = used as f64;
    acc.iter_mut().for_each(|x| *x /= used);
    Some(acc)
}

/// Composite of an occurrence's context, built from the sense-0 input
/// vectors of the context words.
pub fn composite(model: &SenseModel, occ: &Occurrence<'_>) -> Option<Vec<f64>> {
    composite_of(model.dim(), occ.context().map(|w| model.input_vector(w, 0)))
}

/// Unit sense-0 input vectors of every word, computed once per
/// identification step.
pub(crate) struct UnitTable {
    dim: usize,
    unit: Vec<f64>,
    nonzero: Vec<bool>,
}

impl UnitTable {
    pub(crate) fn new(model: &SenseModel) -> Self {
        let dim = model.dim();
        let mut unit = Vec::with_capacity(model.vocab_len() * dim);
        let mut nonzero = Vec::with_capacity(model.vocab_len());
        for w in 0..model.vocab_len() as WordId {
            let v = model.input_vector(w, 0);
            let n = norm(v);
            nonzero.push(n > 0.0);
            unit.extend(v.iter().map(|x| if n > 0.0 { x / n } else { 0.0 }));
        }
        UnitTable { dim, unit, nonzero }
    }

    pub(crate) fn composite(&self, occ: &Occurrence<'_>) -> Option<Vec<f64>> {
        let mut acc = vec![0.0; self.dim];
        let mut used = 0usize;
        for w in occ.context() {
            let w = w as usize;
            if self.nonzero[w] {
                axpy(1.0, &self.unit[w * self.dim..(w + 1) * self.dim], &mut acc);
                used += 1;
            }
        }
        if used == 0 {
            return None;
        }
        let used = used as f64;
        acc.iter_mut().for_each(|x| *x /= used);
        Some(acc)
    }
}
