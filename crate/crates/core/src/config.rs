//! Run configuration: TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::split::Clusterer;
use crate::trainer::DEFAULT_LEARNING_RATE;

/// Fully resolved configuration of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Vec<PathBuf>,
    /// Model file; companion outputs are written next to it.
    pub output: PathBuf,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub subsample: f64,
    pub min_count: u64,
    pub loss_threshold: f64,
    /// Frequency gate; unset bounds scale with the corpus size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_freq: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_freq: Option<u64>,
    pub epochs_per_check: usize,
    pub outer_iters: usize,
    /// Epochs after the last identification step.
    pub final_epochs: usize,
    pub clusterer: Clusterer,
    pub learning_rate: f64,
    pub seed: u64,
    pub threads: usize,
    pub min_cluster_size: usize,
    pub sample_cap: usize,
    pub write_context: bool,
}

/// Every field optional; used for config files and flag overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartialConfig {
    pub corpus: Option<Vec<PathBuf>>,
    pub output: Option<PathBuf>,
    pub dim: Option<usize>,
    pub window: Option<usize>,
    pub negatives: Option<usize>,
    pub subsample: Option<f64>,
    pub min_count: Option<u64>,
    pub loss_threshold: Option<f64>,
    pub min_freq: Option<u64>,
    pub max_freq: Option<u64>,
    pub epochs_per_check: Option<usize>,
    pub outer_iters: Option<usize>,
    pub final_epochs: Option<usize>,
    pub clusterer: Option<Clusterer>,
    pub learning_rate: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub min_cluster_size: Option<usize>,
    pub sample_cap: Option<usize>,
    pub write_context: Option<bool>,
}

macro_rules! overlay {
    ($base:expr, $over:expr, $($field:ident),*) => {
        PartialConfig { $($field: $over.$field.or($base.$field)),* }
    };
}

impl PartialConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start].bytes().filter(|&b| b == b'\n').count() + 1)
                .unwrap_or(1);
            Error::format(origin, line, e.message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    /// Fields set in `over` win.
    pub fn overlay(self, over: PartialConfig) -> PartialConfig {
        overlay!(
            self,
            over,
            corpus,
            output,
            dim,
            window,
            negatives,
            subsample,
            min_count,
            loss_threshold,
            min_freq,
            max_freq,
            epochs_per_check,
            outer_iters,
            final_epochs,
            clusterer,
            learning_rate,
            seed,
            threads,
            min_cluster_size,
            sample_cap,
            write_context
        )
    }

    /// Applies defaults and validates. `corpus`, `output` and
    /// `loss_threshold` have no default.
    pub fn resolve(self) -> Result<RunConfig> {
        let missing = |name: &str| Error::Config(format!("`{name}` is required"));
        let config = RunConfig {
            corpus: self.corpus.ok_or_else(|| missing("corpus"))?,
            output: self.output.ok_or_else(|| missing("output"))?,
            dim: self.dim.unwrap_or(50),
            window: self.window.unwrap_or(10),
            negatives: self.negatives.unwrap_or(10),
            subsample: self.subsample.unwrap_or(1e-4),
            min_count: self.min_count.unwrap_or(10),
            loss_threshold: self.loss_threshold.ok_or_else(|| missing("loss_threshold"))?,
            min_freq: self.min_freq,
            max_freq: self.max_freq,
            epochs_per_check: self.epochs_per_check.unwrap_or(5),
            outer_iters: self.outer_iters.unwrap_or(2),
            final_epochs: self.final_epochs.unwrap_or(5),
            clusterer: self.clusterer.unwrap_or_default(),
            learning_rate: self.learning_rate.unwrap_or(DEFAULT_LEARNING_RATE),
            seed: self.seed.unwrap_or(1),
            threads: self.threads.unwrap_or_else(crate::parallel::default_threads),
            min_cluster_size: self.min_cluster_size.unwrap_or(5),
            sample_cap: self.sample_cap.unwrap_or(50_000),
            write_context: self.write_context.unwrap_or(false),
        };
        config.validate()?;
        Ok(config)
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.corpus.is_empty() {
            return bad("`corpus` lists no files".into());
        }
        for (name, v) in [
            ("dim", self.dim),
            ("window", self.window),
            ("negatives", self.negatives),
            ("epochs_per_check", self.epochs_per_check),
            ("outer_iters", self.outer_iters),
            ("threads", self.threads),
            ("min_cluster_size", self.min_cluster_size),
            ("sample_cap", self.sample_cap),
        ] {
            if v == 0 {
                return bad(format!("`{name}` must be at least 1"));
            }
        }
        if self.min_count == 0 {
            return bad("`min_count` must be at least 1".into());
        }
        if self.subsample.is_nan() || self.subsample <= 0.0 {
            return bad(format!("`subsample` must be > 0, got {}", self.subsample));
        }
        if !(self.loss_threshold > 0.0 && self.loss_threshold.is_finite()) {
            return bad(format!("`loss_threshold` must be > 0, got {}", self.loss_threshold));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("`learning_rate` must be > 0, got {}", self.learning_rate));
        }
        if let (Some(lo), Some(hi)) = (self.min_freq, self.max_freq) {
            if lo > hi {
                return bad(format!("`min_freq` {lo} exceeds `max_freq` {hi}"));
            }
        }
        if i64::try_from(self.seed).is_err() {
            return bad(format!("`seed` must be below 2^63, got {}", self.seed));
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        PartialConfig::from_toml_str(text, origin)?.resolve()
    }

    pub fn as_partial(&self) -> PartialConfig {
        PartialConfig {
            corpus: Some(self.corpus.clone()),
            output: Some(self.output.clone()),
            dim: Some(self.dim),
            window: Some(self.window),
            negatives: Some(self.negatives),
            subsample: Some(self.subsample),
            min_count: Some(self.min_count),
            loss_threshold: Some(self.loss_threshold),
            min_freq: self.min_freq,
            max_freq: self.max_freq,
            epochs_per_check: Some(self.epochs_per_check),
            outer_iters: Some(self.outer_iters),
            final_epochs: Some(self.final_epochs),
            clusterer: Some(self.clusterer),
            learning_rate: Some(self.learning_rate),
            seed: Some(self.seed),
            threads: Some(self.threads),
            min_cluster_size: Some(self.min_cluster_size),
            sample_cap: Some(self.sample_cap),
            write_context: Some(self.write_context),
        }
    }

    /// Manifest text: the config as TOML preceded by provenance comments.
    /// Loading it as a config with `threads = 1` reproduces the run.
    pub fn manifest(&self) -> Result<String> {
        let mut text = format!(
            "# multisense {}\n# rng: ChaCha8 (rand_chacha 0.9), seed {}\n# reproduce: multisense train --config <this file> --threads 1\n",
            env!("CARGO_PKG_VERSION"),
            self.seed
        );
        text.push_str(&self.to_toml_string()?);
        Ok(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn required() -> PartialConfig {
        PartialConfig {
            corpus: Some(vec!["a.txt".into()]),
            output: Some("model.txt".into()),
            loss_threshold: Some(2.15),
            ..PartialConfig::default()
        }
    }

    #[test]
    fn defaults_follow_the_reference_regime() {
        let c = required().resolve().unwrap();
        assert_eq!((c.dim, c.window, c.negatives), (50, 10, 10));
        assert_eq!(c.subsample, 1e-4);
        assert_eq!(c.learning_rate, 0.025);
        assert_eq!(c.min_count, 10);
        assert_eq!((c.epochs_per_check, c.outer_iters, c.final_epochs), (5, 2, 5));
        assert_eq!(c.clusterer, Clusterer::I1);
    }

    #[test]
    fn missing_required_fields() {
        let mut p = required();
        p.loss_threshold = None;
        assert!(matches!(p.resolve(), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for edit in [
            |p: &mut PartialConfig| p.dim = Some(0),
            |p: &mut PartialConfig| p.subsample = Some(0.0),
            |p: &mut PartialConfig| {
                p.min_freq = Some(10);
                p.max_freq = Some(5)
            },
            |p: &mut PartialConfig| p.loss_threshold = Some(-1.0),
            |p: &mut PartialConfig| p.seed = Some(u64::MAX),
        ] {
            let mut p = required();
            edit(&mut p);
            let e = p.resolve().unwrap_err();
            assert_eq!(e.exit_code(), 1, "{e}");
        }
    }

    #[test]
    fn overlay_prefers_the_override() {
        let file = PartialConfig {
            dim: Some(100),
            window: Some(3),
            ..required()
        };
        let flags = PartialConfig {
            dim: Some(200),
            ..PartialConfig::default()
        };
        let c = file.overlay(flags).resolve().unwrap();
        assert_eq!((c.dim, c.window), (200, 3));
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let text = "dim = 5\nbogus = 1\n";
        match PartialConfig::from_toml_str(text, "c.toml") {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn manifest_loads_as_config() {
        let c = required().resolve().unwrap();
        let back = RunConfig::from_toml_str(&c.manifest().unwrap(), "m").unwrap();
        assert_eq!(back, c);
    }

    proptest! {
        #[test]
        fn serialization_is_a_fixed_point(
            dim in 1usize..500,
            window in 1usize..20,
            sub in 1e-7f64..1.0,
            thr in 0.01f64..10.0,
            gate in proptest::option::of((0u64..100, 0u64..1000)),
            seed in 0u64..(i64::MAX as u64),
            spherical in any::<bool>(),
        ) {
            let mut p = required();
            p.dim = Some(dim);
            p.window = Some(window);
            p.subsample = Some(sub);
            p.loss_threshold = Some(thr);
            p.seed = Some(seed);
            p.clusterer = Some(if spherical { Clusterer::Spherical } else { Clusterer::I1 });
            if let Some((lo, extra)) = gate {
                p.min_freq = Some(lo);
                p.max_freq = Some(lo + extra);
            }
            let c = p.resolve().unwrap();
            let once = c.to_toml_string().unwrap();
            let parsed = RunConfig::from_toml_str(&once, "x").unwrap();
            prop_assert_eq!(&parsed, &c);
            prop_assert_eq!(parsed.to_toml_string().unwrap(), once);
        }
    }
}
