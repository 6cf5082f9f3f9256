use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::SenseModel;
use super::params::{ExclusiveParams, ParamAccess};
use super::sampler::NegativeSampler;
use crate::corpus::{Occurrence, OccurrenceStore, WordId};
use crate::error::{Error, Result};
use crate::loss::LossLedger;
use crate::math::{mix_seed, neg_log_sigmoid, sigmoid, CompensatedSum};

/// Loss of one occurrence, split into the full skip-gram term and the
/// positive-only contextual term.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepLoss {
    pub total: f64,
    pub contextual: f64,
}

/// `(word, positive multiplicity, negative multiplicity)`; every term of the
/// loss involving `word` shares the same dot product, so duplicates merge.
type PairTerm = (WordId, u32, u32);

fn collect_pairs(occ: &Occurrence<'_>, negatives: &[WordId], pairs: &mut Vec<PairTerm>) {
    pairs.clear();
    pairs.extend(occ.context().map(|c| (c, 1, 0)));
    pairs.extend(negatives.iter().map(|&k| (k, 0, 1)));
    pairs.sort_unstable_by_key(|p| p.0);
    pairs.dedup_by(|next, kept| {
        if next.0 == kept.0 {
            kept.1 += next.1;
            kept.2 += next.2;
            true
        } else {
            false
        }
    });
}

/// Loss contribution and d(loss)/d(score) for one merged pair term.
#[inline]
fn pair_terms(score: f64, pos: u32, neg: u32) -> (f64, f64, f64) {
    let (pos, neg) = (pos as f64, neg as f64);
    let positive = pos * neg_log_sigmoid(score);
    let negative = if neg > 0.0 { neg * neg_log_sigmoid(-score) } else { 0.0 };
    let s = sigmoid(score);
    let coeff = pos * (s - 1.0) + neg * s;
    (positive + negative, positive, coeff)
}

/// Reusable buffers for [`apply_step`].
pub(crate) struct StepScratch {
    center: Vec<f64>,
    grad: Vec<f64>,
    pairs: Vec<PairTerm>,
    pub(crate) negatives: Vec<WordId>,
}

impl StepScratch {
    pub(crate) fn new(dim: usize) -> Self {
        StepScratch {
            center: vec![0.0; dim],
            grad: vec![0.0; dim],
            pairs: Vec::new(),
            negatives: Vec::new(),
        }
    }
}

/// One AdaGrad step on the skip-gram loss of `occ` with the given
/// negatives. All gradients are taken at the parameter values on entry.
pub(crate) fn apply_step<P: ParamAccess>(
    params: &mut P,
    row: usize,
    occ: &Occurrence<'_>,
    lr: f64,
    scratch: &mut StepScratch,
) -> StepLoss {
    let StepScratch {
        center,
        grad,
        pairs,
        negatives,
    } = scratch;
    params.read_input(row, center);
    grad.iter_mut().for_each(|g| *g = 0.0);
    collect_pairs(occ, negatives, pairs);
    let mut loss = StepLoss::default();
    for &(word, pos, neg) in pairs.iter() {
        let score = params.context_dot(word as usize, center);
        let (total, positive, coeff) = pair_terms(score, pos, neg);
        loss.total += total;
        loss.contextual += positive;
        params.update_context(word as usize, coeff, center, lr, grad);
    }
    params.update_input(row, grad, lr);
    loss.contextual /= occ.context_len().max(1) as f64;
    loss
}

/// Skip-gram negative-sampling loss of one occurrence:
/// `-Σ_{j∈C} ln σ(w·c_j) - Σ_k ln σ(-w·c_k)`.
pub fn occurrence_loss(model: &SenseModel, occ: &Occurrence<'_>, negatives: &[WordId]) -> Result<f64> {
    model.row_of(occ.center, occ.sense)?;
    let w = model.input_vector(occ.center, occ.sense);
    let mut pairs = Vec::new();
    collect_pairs(occ, negatives, &mut pairs);
    Ok(pairs
        .iter()
        .map(|&(k, pos, neg)| {
            let score = crate::math::dot(w, model.context_vector(k));
            pair_terms(score, pos, neg).0
        })
        .sum())
}

/// Gradient of [`occurrence_loss`] with respect to every touched vector.
#[derive(Clone, Debug, PartialEq)]
pub struct OccurrenceGradient {
    pub center: Vec<f64>,
    /// One entry per distinct context or negative word.
    pub contexts: Vec<(WordId, Vec<f64>)>,
}

pub fn occurrence_gradient(
    model: &SenseModel,
    occ: &Occurrence<'_>,
    negatives: &[WordId],
) -> Result<OccurrenceGradient> {
    model.row_of(occ.center, occ.sense)?;
    let w = model.input_vector(occ.center, occ.sense);
    let mut pairs = Vec::new();
    collect_pairs(occ, negatives, &mut pairs);
    let mut center = vec![0.0; model.dim()];
    let mut contexts = Vec::with_capacity(pairs.len());
    for &(k, pos, neg) in &pairs {
        let c = model.context_vector(k);
        let (_, _, coeff) = pair_terms(crate::math::dot(w, c), pos, neg);
        crate::math::axpy(coeff, c, &mut center);
        contexts.push((k, w.iter().map(|x| coeff * x).collect()));
    }
    Ok(OccurrenceGradient { center, contexts })
}

fn exclusive(model: &mut SenseModel) -> (ExclusiveParams<'_>, &[Vec<u32>]) {
    let SenseModel {
        dim,
        sense_rows,
        input,
        input_acc,
        context,
        context_acc,
        ..
    } = model;
    (
        ExclusiveParams {
            dim: *dim,
            input,
            input_acc,
            context,
            context_acc,
        },
        sense_rows,
    )
}

/// Draws negatives for `occ` and applies one AdaGrad step in place.
/// Returns the loss evaluated at the pre-step parameters.
pub fn sgd_step(
    model: &mut SenseModel,
    occ: &Occurrence<'_>,
    sampler: &mut NegativeSampler,
) -> Result<StepLoss> {
    let row = model.row_of(occ.center, occ.sense)?;
    let lr = model.learning_rate;
    let mut scratch = StepScratch::new(model.dim);
    sampler.draw_for(occ, &mut scratch.negatives);
    let (mut params, _) = exclusive(model);
    Ok(apply_step(&mut params, row, occ, lr, &mut scratch))
}

/// Options for [`train_pass`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrainOptions {
    pub epochs: usize,
    /// Worker threads; 1 selects the deterministic sequential path.
    pub threads: usize,
    /// Seed for the per-epoch visiting order.
    pub seed: u64,
}

impl TrainOptions {
    pub fn sequential(epochs: usize, seed: u64) -> Self {
        TrainOptions {
            epochs,
            threads: 1,
            seed,
        }
    }
}

/// Statistics of one epoch. Losses are measured at visit time, before each
/// occurrence's own update.
#[derive(Clone, Debug)]
pub struct EpochStats {
    pub steps: u64,
    pub mean_loss: f64,
    pub mean_contextual_loss: f64,
    pub ledger: LossLedger,
}

fn check_labels(model: &SenseModel, store: &OccurrenceStore) -> Result<()> {
    if store.vocab_len() != model.vocab_len() {
        return Err(Error::Invariant(format!(
            "store covers {} words but the model has {}",
            store.vocab_len(),
            model.vocab_len()
        )));
    }
    for w in 0..store.vocab_len() as WordId {
        let m = model.sense_count(w) as u32;
        if let Some(&p) = store.word_positions(w).iter().find(|&&p| store.sense(p as usize) >= m) {
            return Err(Error::Invariant(format!(
                "occurrence {p} of word {w} has sense {} but m = {m}",
                store.sense(p as usize)
            )));
        }
    }
    Ok(())
}

/// Runs `opts.epochs` passes of SGD over every occurrence in `store`.
pub fn train_pass(
    model: &mut SenseModel,
    store: &OccurrenceStore,
    sampler: &mut NegativeSampler,
    opts: &TrainOptions,
) -> Result<Vec<EpochStats>> {
    if opts.epochs == 0 {
        return Err(Error::Precondition("epochs must be at least 1".into()));
    }
    if opts.threads == 0 {
        return Err(Error::Precondition("threads must be at least 1".into()));
    }
    check_labels(model, store)?;
    let mut order: Vec<u32> = (0..store.len() as u32).collect();
    let mut stats = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(opts.seed, epoch as u64));
        order.shuffle(&mut rng);
        let shard = if opts.threads > 1 && parallel_available() {
            run_parallel(model, store, sampler, &order, opts.threads)?
        } else {
            run_sequential(model, store, sampler, &order)
        };
        let n = shard.steps.max(1) as f64;
        stats.push(EpochStats {
            steps: shard.steps,
            mean_loss: shard.loss.value() / n,
            mean_contextual_loss: shard.contextual.value() / n,
            ledger: shard.ledger,
        });
    }
    Ok(stats)
}

fn parallel_available() -> bool {
    cfg!(feature = "parallel")
}

struct ShardResult {
    steps: u64,
    loss: CompensatedSum,
    contextual: CompensatedSum,
    ledger: LossLedger,
}

impl ShardResult {
    fn new(model: &SenseModel) -> Self {
        ShardResult {
            steps: 0,
            loss: CompensatedSum::default(),
            contextual: CompensatedSum::default(),
            ledger: LossLedger::for_model(model),
        }
    }

    #[cfg_attr(not(feature = "parallel"), allow(dead_code))]
    fn merge(mut self, other: ShardResult) -> Self {
        self.steps += other.steps;
        self.loss.merge(&other.loss);
        self.contextual.merge(&other.contextual);
        self.ledger.merge(&other.ledger);
        self
    }
}

#[allow(clippy::too_many_arguments)]
fn run_shard<P: ParamAccess>(
    params: &mut P,
    sense_rows: &[Vec<u32>],
    lr: f64,
    store: &OccurrenceStore,
    sampler: &mut NegativeSampler,
    order: &[u32],
    result: &mut ShardResult,
    dim: usize,
) {
    let mut scratch = StepScratch::new(dim);
    for &p in order {
        let occ = store.occurrence(p as usize);
        sampler.draw_for(&occ, &mut scratch.negatives);
        let row = sense_rows[occ.center as usize][occ.sense as usize] as usize;
        let loss = apply_step(params, row, &occ, lr, &mut scratch);
        result.steps += 1;
        result.loss.add(loss.total);
        result.contextual.add(loss.contextual);
        result.ledger.accumulate(occ.center, occ.sense, loss.contextual);
    }
}

fn run_sequential(
    model: &mut SenseModel,
    store: &OccurrenceStore,
    sampler: &mut NegativeSampler,
    order: &[u32],
) -> ShardResult {
    let mut result = ShardResult::new(model);
    let lr = model.learning_rate;
    let dim = model.dim;
    let (mut params, rows) = exclusive(model);
    run_shard(&mut params, rows, lr, store, sampler, order, &mut result, dim);
    result
}

#[cfg(feature = "parallel")]
fn run_parallel(
    model: &mut SenseModel,
    store: &OccurrenceStore,
    sampler: &mut NegativeSampler,
    order: &[u32],
    threads: usize,
) -> Result<ShardResult> {
    use super::params::{as_atomic, SharedParams};
    use rayon::prelude::*;

    let empty = ShardResult::new(model);
    let template = LossLedger::for_model(model);
    let samplers: Vec<NegativeSampler> = (0..threads).map(|_| sampler.fork()).collect();
    let chunk = order.len().div_ceil(threads).max(1);
    let pool = crate::parallel::pool(threads)?;
    let lr = model.learning_rate;
    let dim = model.dim;
    let SenseModel {
        sense_rows,
        input,
        input_acc,
        context,
        context_acc,
        ..
    } = model;
    let shared = SharedParams {
        dim,
        input: as_atomic(input),
        input_acc: as_atomic(input_acc),
        context: as_atomic(context),
        context_acc: as_atomic(context_acc),
    };
    let rows: &[Vec<u32>] = sense_rows;
    let results: Vec<ShardResult> = pool.install(|| {
        order
            .par_chunks(chunk)
            .zip(samplers.into_par_iter())
            .map(|(part, mut sampler)| {
                let mut params = shared;
                let mut result = ShardResult {
                    steps: 0,
                    loss: CompensatedSum::default(),
                    contextual: CompensatedSum::default(),
                    ledger: template.clone(),
                };
                run_shard(&mut params, rows, lr, store, &mut sampler, part, &mut result, dim);
                result
            })
            .collect()
    });
    Ok(results.into_iter().fold(empty, ShardResult::merge))
}

#[cfg(not(feature = "parallel"))]
fn run_parallel(
    model: &mut SenseModel,
    store: &OccurrenceStore,
    sampler: &mut NegativeSampler,
    order: &[u32],
    _threads: usize,
) -> Result<ShardResult> {
    Ok(run_sequential(model, store, sampler, order))
}
