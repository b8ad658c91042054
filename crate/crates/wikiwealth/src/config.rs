//! JSON run configuration. Relative paths are resolved against the
//! directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wikiwealth_core::embed::EmbedConfig;
use wikiwealth_core::eval::{ExperimentSpec, ModelKind, ModelSettings, Outcome, Regime};
use wikiwealth_core::geo::Metric;

use crate::error::{Error, Result};

/// One experiment. Country lists may be left empty where the regime
/// implies them: intra needs one country (in `train` or `test`),
/// leave-one-out needs only `test`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentEntry {
    pub regime: Regime,
    pub model: ModelKind,
    #[serde(default)]
    pub train: Vec<String>,
    #[serde(default)]
    pub test: Vec<String>,
}

impl ExperimentEntry {
    /// Full spec, given every country present in the data.
    pub fn resolve(&self, countries: &[String], neighbors: usize, seed: u64, outcome: Outcome) -> Result<ExperimentSpec> {
        let bad = |why: &str| Error::Config(format!("experiment {:?}/{}: {why}", self.regime, self.model.label()));
        let (train, test) = match self.regime {
            Regime::Intra => {
                let c = match (self.train.as_slice(), self.test.as_slice()) {
                    ([c], []) | ([], [c]) => c,
                    ([a], [b]) if a == b => a,
                    _ => return Err(bad("intra needs exactly one country")),
                };
                (vec![c.clone()], vec![c.clone()])
            }
            Regime::Cross => {
                if self.train.is_empty() || self.test.is_empty() {
                    return Err(bad("cross needs train and test countries"));
                }
                (self.train.clone(), self.test.clone())
            }
            Regime::LeaveOneOut => {
                let [held] = self.test.as_slice() else {
                    return Err(bad("leave-one-out needs exactly one test country"));
                };
                let train = if self.train.is_empty() {
                    countries.iter().filter(|c| *c != held).cloned().collect()
                } else {
                    self.train.clone()
                };
                (train, vec![held.clone()])
            }
        };
        Ok(ExperimentSpec {
            regime: self.regime,
            train_countries: train,
            test_countries: test,
            model_kind: self.model,
            neighbors,
            seed,
            outcome,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Article corpus (JSON lines).
    pub corpus: Option<PathBuf>,
    /// Survey CSV files; asset-layout files are pooled before scoring.
    pub surveys: Vec<PathBuf>,
    /// Directory of `<country>_<cluster_id>.nlim` images.
    pub images: Option<PathBuf>,
    /// Embedding checkpoint. Written by `embed`, read by the other commands;
    /// when absent they train embeddings from the corpus in memory.
    pub embeddings: Option<PathBuf>,
    /// Precomputed feature table, used when its neighbour count matches.
    pub features: Option<PathBuf>,
    pub output: PathBuf,
    pub embed: EmbedConfig,
    pub neighbors: usize,
    pub metric: Metric,
    pub normalize_distances: bool,
    pub model: ModelSettings,
    pub outcome: Outcome,
    /// Per-country cap on education records.
    pub education_cap: Option<usize>,
    pub experiments: Vec<ExperimentEntry>,
    /// Model kinds for which the full train × test grid is run.
    pub grid: Vec<ModelKind>,
    pub sweep: Vec<usize>,
    pub categories: Vec<String>,
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            surveys: Vec::new(),
            images: None,
            embeddings: None,
            features: None,
            output: PathBuf::from("results"),
            embed: EmbedConfig::default(),
            neighbors: 10,
            metric: Metric::GreatCircle,
            normalize_distances: false,
            model: ModelSettings::default(),
            outcome: Outcome::Wealth,
            education_cap: None,
            experiments: Vec::new(),
            grid: Vec::new(),
            sweep: vec![1, 5, 10, 15],
            categories: vec!["company".into(), "settlement".into()],
            seed: 0,
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    /// Reads a config file and anchors its relative paths to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    pub fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.corpus, &mut self.images, &mut self.embeddings, &mut self.features].into_iter().flatten() {
            fix(p);
        }
        self.surveys.iter_mut().for_each(fix);
        fix(&mut self.output);
    }

    /// Sets the experiment seed and the embedding seed together.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.embed.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        if self.neighbors == 0 {
            return Err(Error::Config("neighbors must be at least 1".into()));
        }
        if self.sweep.contains(&0) {
            return Err(Error::Config("sweep neighbour counts must be at least 1".into()));
        }
        self.embed.validate()?;
        self.model.train.validate()?;
        Ok(())
    }

    pub fn worker_threads(&self) -> usize {
        match self.threads {
            0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
            n => n,
        }
    }
}
