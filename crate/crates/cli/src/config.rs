//! Run configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! jobs = 4
//! out = "runs/ml"
//!
//! [data]
//! source = "movielens"          # or "amazon"
//! dir = "/data/xdomain"         # raw dataset root, see `DataDir`
//! # ingested = "runs/ingest"    # or the output of `gcca-rec ingest`
//! min_ratings = 0               # keep users with this many ratings in every domain of a pair
//!
//! [simulate]
//! preset = "sparsity"           # or "rows"; explicit axes below override it
//! reps = 100
//!
//! [pipeline]                    # shared by `train` and `evaluate`
//! k_mf = 50
//! k_gcca = 75
//! variant = "issm"
//! [pipeline.mf]
//! epochs = 30
//! [pipeline.gcca]
//! memory_budget_mib = 4096
//!
//! [evaluate]
//! preset = "movielens"          # the full 12-pair grid, or list pairs:
//! c = [0, 5, 10]
//! variants = ["standard", "issm"]
//! views = ["mf", "lda+mf"]
//! [[evaluate.pairs]]
//! target = "Action"
//! auxiliaries = ["Drama"]
//!
//! [train]
//! target = "Action"
//! auxiliaries = ["Drama"]
//! fold = 0
//! c = 0
//! ```
//!
//! The top-level `seed` is the only seed that matters: the pipeline, LDA and
//! simulation seeds are replaced by it in the resolved copy.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gcca_rec::gcca::{GccaOptions, Variant};
use gcca_rec::pipeline::PipelineConfig;
use gcca_rec::simulator::SweepGrid;
use gcca_rec::topics::LdaConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub data: DataConfig,
    pub simulate: SimulateConfig,
    pub pipeline: PipelineConfig,
    pub evaluate: EvaluateConfig,
    pub train: TrainRunConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::usage(format!("cannot serialize the resolved config: {e}")))
    }

    /// Pushes the root seed into every nested seed and checks the sections
    /// shared by several commands.
    pub fn resolve(&mut self) -> Result<()> {
        if self.seed > i64::MAX as u64 {
            return Err(CliError::usage(format!("seed {} does not fit in a signed 64-bit integer", self.seed)));
        }
        if self.jobs == Some(0) {
            return Err(CliError::usage("jobs must be positive"));
        }
        if !self.pipeline.target.is_empty() || !self.pipeline.auxiliaries.is_empty() {
            return Err(CliError::usage(
                "[pipeline] takes no target or auxiliaries; set them in [train] or [evaluate]",
            ));
        }
        self.pipeline.seed = self.seed;
        self.pipeline.mf.seed = self.seed;
        self.evaluate.lda.seed = self.seed;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Movielens,
    Amazon,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Movielens => "movielens",
            Source::Amazon => "amazon",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub source: Option<Source>,
    /// Raw dataset root.
    pub dir: Option<PathBuf>,
    /// Directory written by `ingest`; takes precedence over `dir`.
    pub ingested: Option<PathBuf>,
    /// Domains to ingest; empty means every domain of the source.
    pub domains: Vec<String>,
    /// Per-pair common-user threshold; 0 keeps everyone.
    pub min_ratings: usize,
    /// Review tokens rarer than this are dropped before LDA.
    pub min_token_count: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: None,
            dir: None,
            ingested: None,
            domains: Vec::new(),
            min_ratings: 0,
            min_token_count: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SimPreset {
    /// 4 and 8 views, sparsity 0.05 to 0.5, L = 500.
    Sparsity,
    /// 2 views, sparsity 0.4, L from 500 to 2500.
    Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub preset: Option<SimPreset>,
    pub domains: Vec<usize>,
    pub sparsity: Vec<f64>,
    pub rows: Vec<usize>,
    pub reps: usize,
    pub k: Option<usize>,
    pub latent_dim: usize,
    pub sigma: f64,
    pub gcca: GccaOptions,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            preset: None,
            domains: Vec::new(),
            sparsity: Vec::new(),
            rows: Vec::new(),
            reps: 100,
            k: None,
            latent_dim: 10,
            sigma: 0.1,
            gcca: GccaOptions::default(),
        }
    }
}

impl SimulateConfig {
    /// The preset grid with any explicitly given axis substituted.
    pub fn grid(&self) -> SweepGrid {
        let base = match self.preset {
            Some(SimPreset::Sparsity) => SweepGrid::sparsity_preset(),
            Some(SimPreset::Rows) => SweepGrid::rows_preset(),
            None => SweepGrid {
                domains: Vec::new(),
                sparsity: Vec::new(),
                rows: Vec::new(),
            },
        };
        fn pick<T: Clone>(given: &[T], preset: Vec<T>) -> Vec<T> {
            if given.is_empty() {
                preset
            } else {
                given.to_vec()
            }
        }
        SweepGrid {
            domains: pick(&self.domains, base.domains),
            sparsity: pick(&self.sparsity, base.sparsity),
            rows: pick(&self.rows, base.rows),
        }
    }
}

/// Inputs to GCCA besides the target factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViewKind {
    Pca,
    Lda,
    Mf,
}

/// A non-empty combination such as `lda+mf`, printed in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ViewSet(BTreeSet<ViewKind>);

impl ViewSet {
    pub fn mf() -> Self {
        Self([ViewKind::Mf].into())
    }

    pub fn contains(&self, kind: ViewKind) -> bool {
        self.0.contains(&kind)
    }
}

impl FromStr for ViewSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut set = BTreeSet::new();
        for part in s.split(['+', '-']).map(str::trim) {
            let kind = match part.to_ascii_lowercase().as_str() {
                "mf" => ViewKind::Mf,
                "pca" => ViewKind::Pca,
                "lda" => ViewKind::Lda,
                other => return Err(format!("unknown view {other:?} in {s:?}; use mf, pca, lda joined by '+'")),
            };
            if !set.insert(kind) {
                return Err(format!("view {part:?} repeated in {s:?}"));
            }
        }
        Ok(Self(set))
    }
}

impl fmt::Display for ViewSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self
            .0
            .iter()
            .map(|k| match k {
                ViewKind::Pca => "pca",
                ViewKind::Lda => "lda",
                ViewKind::Mf => "mf",
            })
            .collect();
        f.write_str(&names.join("+"))
    }
}

impl Serialize for ViewSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ViewSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub target: String,
    pub auxiliaries: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    /// Every ordered pair of the dataset's cross-domain table.
    pub preset: Option<Source>,
    pub pairs: Vec<PairConfig>,
    pub c: Vec<usize>,
    pub folds: usize,
    pub max_folds: Option<usize>,
    pub variants: Vec<Variant>,
    pub views: Vec<ViewSet>,
    /// Width of each PCA view, capped by the matrix rank.
    pub pca_components: usize,
    pub lda: LdaConfig,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            preset: None,
            pairs: Vec::new(),
            c: vec![0],
            folds: 5,
            max_folds: None,
            variants: vec![Variant::Standard, Variant::Issm],
            views: vec![ViewSet::mf()],
            pca_components: 50,
            lda: LdaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainRunConfig {
    pub target: Option<String>,
    pub auxiliaries: Vec<String>,
    pub views: ViewSet,
    pub folds: usize,
    pub fold: usize,
    pub c: usize,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        Self {
            target: None,
            auxiliaries: Vec::new(),
            views: ViewSet::mf(),
            folds: 5,
            fold: 0,
            c: 0,
        }
    }
}
