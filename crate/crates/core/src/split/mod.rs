//! Occurrence clustering and sense splitting.

mod composite;
mod kmeans;
mod solution;

use std::fmt;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use composite::{composite, composite_of};
pub use kmeans::{spherical_kmeans, KmeansResult};
pub use solution::{
    balanced_split, greedy_refine, i1_cluster, i1_objective, ClusterSolution, RefineStats, MOVE_TOLERANCE,
};

use crate::corpus::{OccurrenceStore, SenseId, Vocabulary, WordId};
use crate::error::{Error, Result};
use crate::loss::{select_candidates, CandidateFilter, LossLedger};
use crate::math::{cosine, mix_seed, norm};
use crate::trainer::{train_pass, NegativeSampler, SenseModel, TrainOptions};
use composite::UnitTable;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clusterer {
    /// Greedy incremental I1 refinement.
    #[default]
    I1,
    /// Spherical k-means.
    Spherical,
}

impl fmt::Display for Clusterer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Clusterer::I1 => "i1",
            Clusterer::Spherical => "spherical",
        })
    }
}

impl std::str::FromStr for Clusterer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "i1" => Ok(Clusterer::I1),
            "spherical" => Ok(Clusterer::Spherical),
            other => Err(Error::Config(format!("unknown clusterer `{other}` (expected i1 or spherical)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitParams {
    pub clusterer: Clusterer,
    /// Both clusters must reach this size or the split is rejected.
    pub min_cluster_size: usize,
    /// Larger occurrence sets are clustered on a uniform sample of this size.
    pub sample_cap: usize,
    /// Length of the nudge separating the child sense from its parent.
    pub nudge: f64,
    pub max_passes: usize,
    /// Independent greedy restarts for the I1 clusterer; the best is kept.
    pub trials: usize,
}

impl Default for SplitParams {
    fn default() -> Self {
        SplitParams {
            clusterer: Clusterer::I1,
            min_cluster_size: 5,
            sample_cap: 50_000,
            nudge: 0.01,
            max_passes: 100,
            trials: 10,
        }
    }
}

/// One accepted split.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitRecord {
    pub word: WordId,
    pub old_sense: SenseId,
    pub new_sense: SenseId,
    pub n0: usize,
    pub n1: usize,
    /// I1 objective of the clustered (possibly sampled) solution.
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SkipReason {
    TooFewOccurrences { found: usize, needed: usize },
    ZeroComposites,
    SmallCluster { n0: usize, n1: usize },
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SkipReason::TooFewOccurrences { found, needed } => {
                write!(f, "{found} occurrences, need {needed}")
            }
            SkipReason::ZeroComposites => f.write_str("every composite is zero"),
            SkipReason::SmallCluster { n0, n1 } => write!(f, "cluster sizes {n0}/{n1} below minimum"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SplitOutcome {
    Split(SplitRecord),
    Skipped(SkipReason),
}

/// Clustering result for one (word, sense), computed without touching the
/// model or the store.
#[derive(Clone, Debug)]
struct SplitPlan {
    word: WordId,
    sense: SenseId,
    to_new: Vec<u32>,
    n0: usize,
    n1: usize,
    objective: f64,
    direction: Vec<f64>,
}

fn cluster(composites: &[Vec<f64>], params: &SplitParams, seed: u64) -> Result<(ClusterSolution, f64)> {
    match params.clusterer {
        Clusterer::I1 => {
            let (sol, _) = i1_cluster(composites, params.trials, params.max_passes, seed)?;
            let objective = sol.objective();
            Ok((sol, objective))
        }
        Clusterer::Spherical => {
            let r = spherical_kmeans(composites, 2, seed, params.max_passes)?;
            let objective = i1_objective(&r.solution);
            Ok((r.solution, objective))
        }
    }
}

fn plan_split(
    table: &UnitTable,
    store: &OccurrenceStore,
    word: WordId,
    sense: SenseId,
    params: &SplitParams,
    seed: u64,
) -> Result<std::result::Result<SplitPlan, SkipReason>> {
    let positions: Vec<u32> = store
        .word_positions(word)
        .iter()
        .copied()
        .filter(|&p| store.sense(p as usize) == sense)
        .collect();
    let needed = 2 * params.min_cluster_size.max(1);
    if positions.len() < needed {
        return Ok(Err(SkipReason::TooFewOccurrences {
            found: positions.len(),
            needed,
        }));
    }

    let mut usable: Vec<(u32, Vec<f64>)> = Vec::with_capacity(positions.len());
    let mut zero = 0usize;
    for &p in &positions {
        match table.composite(&store.occurrence(p as usize)) {
            Some(c) if norm(&c) > 0.0 => usable.push((p, c)),
            _ => zero += 1,
        }
    }
    if usable.len() < 2 {
        return Ok(Err(SkipReason::ZeroComposites));
    }

    let sample: Vec<usize> = if usable.len() > params.sample_cap.max(2) {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 2));
        let mut idx = rand::seq::index::sample(&mut rng, usable.len(), params.sample_cap.max(2)).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..usable.len()).collect()
    };
    let composites: Vec<Vec<f64>> = sample.iter().map(|&i| usable[i].1.clone()).collect();
    let (solution, objective) = cluster(&composites, params, seed)?;

    let mut cluster_of = vec![usize::MAX; usable.len()];
    for (k, &i) in sample.iter().enumerate() {
        cluster_of[i] = solution.assignment()[k];
    }
    let (s0, s1) = (solution.sum(0), solution.sum(1));
    for (i, slot) in cluster_of.iter_mut().enumerate() {
        if *slot == usize::MAX {
            let c = &usable[i].1;
            *slot = usize::from(cosine(c, s1) > cosine(c, s0));
        }
    }
    let to_new: Vec<u32> = usable
        .iter()
        .zip(&cluster_of)
        .filter(|(_, &k)| k == 1)
        .map(|((p, _), _)| *p)
        .collect();
    let n1 = to_new.len();
    let n0 = positions.len() - n1;
    debug_assert_eq!(n0, usable.len() - n1 + zero);
    if n0.min(n1) < params.min_cluster_size {
        return Ok(Err(SkipReason::SmallCluster { n0, n1 }));
    }

    let (c0, c1) = (solution.centroid(0), solution.centroid(1));
    let mut direction: Vec<f64> = c1.iter().zip(&c0).map(|(a, b)| a - b).collect();
    let len = norm(&direction);
    if len > 0.0 {
        direction.iter_mut().for_each(|x| *x /= len);
    }
    Ok(Ok(SplitPlan {
        word,
        sense,
        to_new,
        n0,
        n1,
        objective,
        direction,
    }))
}

fn apply_split(model: &mut SenseModel, store: &mut OccurrenceStore, plan: SplitPlan, nudge: f64) -> Result<SplitRecord> {
    let parent = model.input_vector(plan.word, plan.sense);
    let child: Vec<f64> = parent.iter().zip(&plan.direction).map(|(p, d)| p + nudge * d).collect();
    let new_sense = model.add_sense(plan.word, plan.sense, &child)?;
    for &p in &plan.to_new {
        store.set_sense(p as usize, new_sense);
    }
    Ok(SplitRecord {
        word: plan.word,
        old_sense: plan.sense,
        new_sense,
        n0: plan.n0,
        n1: plan.n1,
        objective: plan.objective,
    })
}

fn check_word(model: &SenseModel, store: &OccurrenceStore, word: WordId, sense: SenseId) -> Result<()> {
    if word as usize >= model.vocab_len() || store.vocab_len() != model.vocab_len() {
        return Err(Error::Invariant(format!("word {word} outside the model vocabulary")));
    }
    if sense as usize >= model.sense_count(word) {
        return Err(Error::Invariant(format!("word {word} has no sense {sense}")));
    }
    Ok(())
}

/// Clusters the occurrences of `(word, sense)` into two groups. Cluster 0
/// keeps `sense`; cluster 1 becomes a new sense whose input vector is the
/// parent nudged towards cluster 1's context direction. A refused split
/// leaves model and store untouched.
pub fn split_word(
    model: &mut SenseModel,
    store: &mut OccurrenceStore,
    word: WordId,
    sense: SenseId,
    params: &SplitParams,
    seed: u64,
) -> Result<SplitOutcome> {
    check_word(model, store, word, sense)?;
    let table = UnitTable::new(model);
    match plan_split(&table, store, word, sense, params, seed)? {
        Ok(plan) => Ok(SplitOutcome::Split(apply_split(model, store, plan, params.nudge)?)),
        Err(reason) => Ok(SplitOutcome::Skipped(reason)),
    }
}

fn split_seed(seed: u64, word: WordId, sense: SenseId) -> u64 {
    mix_seed(seed, (u64::from(word) << 32) | u64::from(sense))
}

/// Splits every candidate against the same frozen model. Clustering runs in
/// parallel across candidates; relabeling is applied afterwards in
/// candidate order.
pub fn split_candidates(
    model: &mut SenseModel,
    store: &mut OccurrenceStore,
    candidates: &[(WordId, SenseId)],
    params: &SplitParams,
    threads: usize,
    seed: u64,
) -> Result<Vec<(WordId, SenseId, SplitOutcome)>> {
    for &(w, s) in candidates {
        check_word(model, store, w, s)?;
    }
    let table = UnitTable::new(model);
    let plans = {
        let store = &*store;
        crate::parallel::map(candidates, threads, |&(w, s)| {
            plan_split(&table, store, w, s, params, split_seed(seed, w, s))
        })?
    };
    let mut out = Vec::with_capacity(candidates.len());
    for (&(w, s), plan) in candidates.iter().zip(plans) {
        let outcome = match plan? {
            Ok(plan) => SplitOutcome::Split(apply_split(model, store, plan, params.nudge)?),
            Err(reason) => SplitOutcome::Skipped(reason),
        };
        out.push((w, s, outcome));
    }
    Ok(out)
}

/// `token<TAB>old_sense<TAB>new_sense<TAB>n0<TAB>n1<TAB>objective` lines.
pub fn write_split_log<W: Write>(records: &[SplitRecord], vocab: &Vocabulary, mut out: W) -> std::io::Result<()> {
    for r in records {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{:.6}",
            vocab.word(r.word),
            r.old_sense,
            r.new_sense,
            r.n0,
            r.n1,
            r.objective
        )?;
    }
    Ok(())
}

/// Options for [`ldmi_iterate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LdmiOptions {
    pub epochs_per_check: usize,
    pub outer_iters: usize,
    pub threads: usize,
    pub seed: u64,
    pub split: SplitParams,
}

/// Per-epoch summary without the ledger.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochSummary {
    pub steps: u64,
    pub mean_loss: f64,
    pub mean_contextual_loss: f64,
}

#[derive(Clone, Debug)]
pub struct IterationReport {
    pub epochs: Vec<EpochSummary>,
    /// Contextual losses gathered during the last epoch before identification.
    pub ledger: LossLedger,
    pub candidates: Vec<(WordId, SenseId)>,
    pub splits: Vec<SplitRecord>,
    pub skipped: Vec<(WordId, SenseId, SkipReason)>,
}

/// Seed used for the training block of outer iteration `iteration`.
pub fn iteration_seed(seed: u64, iteration: usize) -> u64 {
    mix_seed(seed, iteration as u64)
}

/// Alternates `epochs_per_check` SGD epochs with loss-driven
/// identification and splitting, `outer_iters` times.
pub fn ldmi_iterate(
    model: &mut SenseModel,
    store: &mut OccurrenceStore,
    sampler: &mut NegativeSampler,
    vocab: &Vocabulary,
    filter: &CandidateFilter,
    opts: &LdmiOptions,
) -> Result<Vec<IterationReport>> {
    if opts.outer_iters == 0 {
        return Err(Error::Precondition("outer_iters must be at least 1".into()));
    }
    let mut reports = Vec::with_capacity(opts.outer_iters);
    for iteration in 0..opts.outer_iters {
        let train = TrainOptions {
            epochs: opts.epochs_per_check,
            threads: opts.threads,
            seed: iteration_seed(opts.seed, iteration),
        };
        let mut stats = train_pass(model, store, sampler, &train)?;
        let epochs = stats
            .iter()
            .map(|e| EpochSummary {
                steps: e.steps,
                mean_loss: e.mean_loss,
                mean_contextual_loss: e.mean_contextual_loss,
            })
            .collect();
        let ledger = stats.pop().expect("at least one epoch").ledger;
        let candidates = select_candidates(&ledger, vocab, filter);
        log::info!(
            "iteration {}: {} candidate senses above {}",
            iteration + 1,
            candidates.len(),
            filter.loss_threshold
        );
        let outcomes = split_candidates(
            model,
            store,
            &candidates,
            &opts.split,
            opts.threads,
            mix_seed(opts.seed, 0x5_0000 + iteration as u64),
        )?;
        let mut splits = Vec::new();
        let mut skipped = Vec::new();
        for (w, s, outcome) in outcomes {
            match outcome {
                SplitOutcome::Split(r) => splits.push(r),
                SplitOutcome::Skipped(reason) => {
                    log::info!("skipped {}#{s}: {reason}", vocab.word(w));
                    skipped.push((w, s, reason));
                }
            }
        }
        let bound = 1usize.checked_shl(iteration as u32 + 1).unwrap_or(usize::MAX);
        if model.max_sense_count() > bound {
            return Err(Error::Invariant(format!(
                "{} senses after {} iterations exceeds {bound}",
                model.max_sense_count(),
                iteration + 1
            )));
        }
        reports.push(IterationReport {
            epochs,
            ledger,
            candidates,
            splits,
            skipped,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Occurrence;

    /// Word 0 appears in two context families: words 1..=3 and words 4..=6,
    /// whose input vectors point in orthogonal directions.
    fn two_topic_setup(n_each: usize) -> (SenseModel, OccurrenceStore) {
        let mut lines = Vec::new();
        for i in 0..n_each {
            lines.push(vec![1 + (i % 3) as u32, 0, 1 + ((i + 1) % 3) as u32]);
            lines.push(vec![4 + (i % 3) as u32, 0, 4 + ((i + 1) % 3) as u32]);
        }
        let store = OccurrenceStore::from_id_lines(lines, 7, 1).unwrap();
        let mut model = SenseModel::new(7, 4, 0.025, 1).unwrap();
        for w in 1..=6u32 {
            let v = model.input_vector_mut(w, 0);
            v.iter_mut().for_each(|x| *x = 0.0);
            v[if w <= 3 { 0 } else { 1 }] = 1.0;
            v[2] = 0.01 * w as f64;
        }
        (model, store)
    }

    #[test]
    fn split_separates_context_families() {
        for clusterer in [Clusterer::I1, Clusterer::Spherical] {
            let (mut model, mut store) = two_topic_setup(20);
            let params = SplitParams {
                clusterer,
                ..SplitParams::default()
            };
            let out = split_word(&mut model, &mut store, 0, 0, &params, 3).unwrap();
            let SplitOutcome::Split(rec) = out else { panic!("{out:?}") };
            assert_eq!((rec.old_sense, rec.new_sense, rec.n0, rec.n1), (0, 1, 20, 20));
            assert_eq!(model.sense_count(0), 2);
            for &p in store.word_positions(0) {
                let occ = store.occurrence(p as usize);
                let family = occ.context().next().unwrap() >= 4;
                let first = store.word_positions(0)[0] as usize;
                let first_family = store.occurrence(first).context().next().unwrap() >= 4;
                assert_eq!(store.sense(p as usize) == store.sense(first), family == first_family);
            }
            let parent = model.input_vector(0, 0).to_vec();
            let child = model.input_vector(0, 1);
            let gap: f64 = parent.iter().zip(child).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!((gap - 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn refused_split_leaves_everything_untouched() {
        let (mut model, mut store) = two_topic_setup(4);
        let (m0, s0) = (model.clone(), store.clone());
        let out = split_word(&mut model, &mut store, 0, 0, &SplitParams::default(), 3).unwrap();
        assert!(matches!(out, SplitOutcome::Skipped(SkipReason::TooFewOccurrences { found: 8, .. })));
        assert_eq!(model, m0);
        assert_eq!(store, s0);
    }

    #[test]
    fn zero_composites_are_refused() {
        let (mut model, mut store) = two_topic_setup(10);
        for w in 1..=6 {
            model.input_vector_mut(w, 0).iter_mut().for_each(|x| *x = 0.0);
        }
        let out = split_word(&mut model, &mut store, 0, 0, &SplitParams::default(), 3).unwrap();
        assert_eq!(out, SplitOutcome::Skipped(SkipReason::ZeroComposites));
        assert_eq!(model.sense_count(0), 1);
    }

    #[test]
    fn sampled_clustering_assigns_the_remainder() {
        let (mut model, mut store) = two_topic_setup(40);
        let params = SplitParams {
            sample_cap: 20,
            ..SplitParams::default()
        };
        let SplitOutcome::Split(rec) = split_word(&mut model, &mut store, 0, 0, &params, 8).unwrap() else {
            panic!()
        };
        assert_eq!(rec.n0 + rec.n1, 80);
        assert_eq!(rec.n0, 40);
    }

    #[test]
    fn split_log_layout() {
        let vocab = Vocabulary::from_entries(vec![("bank".into(), 10), ("river".into(), 5)]).unwrap();
        let rec = SplitRecord {
            word: 0,
            old_sense: 0,
            new_sense: 1,
            n0: 6,
            n1: 4,
            objective: 7.25,
        };
        let mut buf = Vec::new();
        write_split_log(&[rec], &vocab, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "bank\t0\t1\t6\t4\t7.250000\n");
    }

    #[test]
    fn composite_skips_nothing_for_single_sense_contexts() {
        let (model, _) = two_topic_setup(1);
        let ctx = [1, 2];
        let c = composite(&model, &Occurrence::with_context(0, 0, &ctx)).unwrap();
        assert!(norm(&c) > 0.99);
    }

    #[test]
    fn clusterer_parses() {
        assert_eq!("i1".parse::<Clusterer>().unwrap(), Clusterer::I1);
        assert_eq!("spherical".parse::<Clusterer>().unwrap(), Clusterer::Spherical);
        assert!("kmeans".parse::<Clusterer>().is_err());
        assert_eq!(Clusterer::Spherical.to_string(), "spherical");
    }
}
