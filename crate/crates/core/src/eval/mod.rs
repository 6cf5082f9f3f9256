//! Word-similarity evaluation of sense vectors.

mod datasets;
mod neighbors;
mod similarity;
mod spearman;

use std::fmt;

pub use datasets::{load_dataset, read_scws, read_wordsim, Dataset};
pub use neighbors::{nearest_neighbors, Neighbor};
pub use similarity::{
    avg_sim, avg_sim_c, best_sense, context_ids, max_sim_c, sense_probabilities, sim_sense_context,
    ContextualPair, PlainPair, PROBABILITY_CLAMP,
};
pub use spearman::{fractional_ranks, spearman};

use crate::embeddings::SenseVectors;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    MaxSimC,
    AvgSimC,
    AvgSim,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::MaxSimC => "maxsimc",
            Metric::AvgSimC => "avgsimc",
            Metric::AvgSim => "avgsim",
        })
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maxsimc" => Ok(Metric::MaxSimC),
            "avgsimc" => Ok(Metric::AvgSimC),
            "avgsim" => Ok(Metric::AvgSim),
            other => Err(Error::Config(format!(
                "unknown metric `{other}` (expected maxsimc, avgsimc or avgsim)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub metric: Metric,
    pub total: usize,
    pub scored: usize,
    /// Spearman's ρ over the scored pairs.
    pub rho: f64,
    pub model_scores: Vec<f64>,
    pub human_scores: Vec<f64>,
}

impl EvalReport {
    pub fn coverage(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.scored as f64 / self.total as f64
        }
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "metric\t{}", self.metric)?;
        writeln!(f, "pairs\t{}", self.total)?;
        writeln!(
            f,
            "coverage\t{}/{} ({:.2}%)",
            self.scored,
            self.total,
            100.0 * self.coverage()
        )?;
        writeln!(f, "rho_x100\t{:.2}", 100.0 * self.rho)
    }
}

fn skippable(e: &Error) -> bool {
    matches!(e, Error::UnknownToken(_) | Error::Unscorable)
}

/// Scores every pair, drops those with an out-of-vocabulary target or an
/// unscorable context, and correlates the rest with the human judgments.
pub fn evaluate(vectors: &SenseVectors, dataset: &Dataset, metric: Metric) -> Result<EvalReport> {
    let scored: Vec<Result<(f64, f64)>> = match dataset {
        Dataset::Contextual(pairs) => pairs
            .iter()
            .map(|p| {
                let s = match metric {
                    Metric::MaxSimC => max_sim_c(vectors, p),
                    Metric::AvgSimC => avg_sim_c(vectors, p),
                    Metric::AvgSim => avg_sim(vectors, &p.word1, &p.word2),
                }?;
                Ok((s, p.score))
            })
            .collect(),
        Dataset::Plain(pairs) => {
            if metric != Metric::AvgSim {
                return Err(Error::Config(format!(
                    "metric {metric} needs sentential contexts; use avgsim for plain pairs"
                )));
            }
            pairs
                .iter()
                .map(|p| Ok((avg_sim(vectors, &p.word1, &p.word2)?, p.score)))
                .collect()
        }
    };
    let mut model_scores = Vec::new();
    let mut human_scores = Vec::new();
    for r in scored {
        match r {
            Ok((m, h)) => {
                model_scores.push(m);
                human_scores.push(h);
            }
            Err(e) if skippable(&e) => {}
            Err(e) => return Err(e),
        }
    }
    let total = dataset.len();
    if model_scores.is_empty() {
        return Err(Error::NoScorablePairs { total });
    }
    let rho = spearman(&model_scores, &human_scores)?;
    Ok(EvalReport {
        metric,
        total,
        scored: model_scores.len(),
        rho,
        model_scores,
        human_scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vectors() -> SenseVectors {
        SenseVectors::from_entries(
            2,
            vec![
                ("a".to_string(), vec![vec![1.0, 0.0]]),
                ("b".to_string(), vec![vec![0.8, 0.6]]),
                ("c".to_string(), vec![vec![0.0, 1.0]]),
                ("d".to_string(), vec![vec![-0.6, 0.8]]),
            ],
        )
        .unwrap()
    }

    fn plain(pairs: &[(&str, &str, f64)]) -> Dataset {
        Dataset::Plain(
            pairs
                .iter()
                .map(|&(a, b, s)| PlainPair {
                    word1: a.into(),
                    word2: b.into(),
                    score: s,
                })
                .collect(),
        )
    }

    #[test]
    fn hand_ranked_fixture() {
        // cosines: a-b 0.8, a-c 0, a-d -0.6, b-c 0.6, c-d 0.8 (tie with a-b)
        let data = plain(&[
            ("a", "b", 9.0),
            ("a", "c", 3.0),
            ("a", "d", 1.0),
            ("b", "c", 5.0),
            ("c", "d", 7.0),
        ]);
        let r = evaluate(&vectors(), &data, Metric::AvgSim).unwrap();
        // model ranks [4.5, 2, 1, 3, 4.5], human ranks [5, 2, 1, 3, 4]
        // centered model [1.5, -1, -2, 0, 1.5], human [2, -1, -2, 0, 1]
        let expected = 9.5 / (9.5f64.sqrt() * 10f64.sqrt());
        assert!((r.rho - expected).abs() < 1e-12);
        assert_eq!((r.total, r.scored), (5, 5));
    }

    #[test]
    fn oov_pairs_are_dropped_and_counted() {
        let data = plain(&[("a", "b", 9.0), ("a", "zz", 1.0), ("a", "c", 3.0), ("a", "d", 2.0)]);
        let r = evaluate(&vectors(), &data, Metric::AvgSim).unwrap();
        assert_eq!((r.total, r.scored), (4, 3));
        assert_eq!(r.human_scores, vec![9.0, 3.0, 2.0]);
        assert!(r.to_string().contains("coverage\t3/4 (75.00%)"));
    }

    #[test]
    fn nothing_scorable_is_an_error() {
        let data = plain(&[("x", "y", 1.0), ("z", "w", 2.0)]);
        assert!(matches!(
            evaluate(&vectors(), &data, Metric::AvgSim),
            Err(Error::NoScorablePairs { total: 2 })
        ));
        assert!(matches!(evaluate(&vectors(), &data, Metric::MaxSimC), Err(Error::Config(_))));
    }

    #[test]
    fn metric_names_round_trip() {
        for m in [Metric::MaxSimC, Metric::AvgSimC, Metric::AvgSim] {
            assert_eq!(m.to_string().parse::<Metric>().unwrap(), m);
        }
    }
}
