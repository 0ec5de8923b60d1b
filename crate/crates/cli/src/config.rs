//! Run configuration: built-in defaults, then an optional TOML file, then
//! command-line flags. Later sources win field by field.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use atomshap::executor::ExecConfig;
use atomshap::kg::{DatasetBundle, Split, TripleGraph};
use atomshap::scorer::{
    AtomScorer, ComplexScorer, EmbeddingTable, Normalization, OracleScorer, SymbolicScorer, DEFAULT_EPSILON,
};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    /// ComplEx embeddings read from `--embeddings`.
    Complex,
    /// Noisy lookup in the full graph; needs no embeddings.
    Oracle,
    /// Exact lookup in the full graph: a perfect link predictor.
    Symbolic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservedSplit {
    /// Explain validation queries: observe train, complete with valid.
    Train,
    /// Explain test queries: observe valid, complete with test.
    Valid,
}

impl ObservedSplit {
    pub fn observed(self) -> Split {
        match self {
            ObservedSplit::Train => Split::Train,
            ObservedSplit::Valid => Split::Valid,
        }
    }

    /// The split whose graph counts as complete for this observation.
    pub fn full(self) -> Split {
        match self {
            ObservedSplit::Train => Split::Valid,
            ObservedSplit::Valid => Split::Test,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Minmax,
    Sigmoid,
}

/// Flags shared by every subcommand; all optional so that the config file
/// can supply them.
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunArgs {
    /// TOML file with any of these settings; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Dataset directory with entities.dict, relations.dict and split files.
    #[arg(long, global = true, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    /// Whether split files are cumulative (default) or incremental.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub cumulative: Option<bool>,
    /// Embedding container for `--scorer complex`.
    #[arg(long, global = true, value_name = "FILE")]
    pub embeddings: Option<PathBuf>,
    /// Beam width for intermediate variables.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Score of entities a symbolic lookup does not reach.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Root seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub scorer: Option<ScorerKind>,
    #[arg(long, global = true, value_enum)]
    pub observed: Option<ObservedSplit>,
    /// Score normalization for embeddings.
    #[arg(long, global = true, value_enum)]
    pub normalization: Option<NormKind>,
    /// Output directory for files written by the command.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

impl RunArgs {
    fn or(self, base: RunArgs) -> RunArgs {
        RunArgs {
            config: self.config.or(base.config),
            dataset: self.dataset.or(base.dataset),
            cumulative: self.cumulative.or(base.cumulative),
            embeddings: self.embeddings.or(base.embeddings),
            k: self.k.or(base.k),
            epsilon: self.epsilon.or(base.epsilon),
            seed: self.seed.or(base.seed),
            scorer: self.scorer.or(base.scorer),
            observed: self.observed.or(base.observed),
            normalization: self.normalization.or(base.normalization),
            out: self.out.or(base.out),
            workers: self.workers.or(base.workers),
        }
    }
}

/// Fully resolved settings.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub cumulative: bool,
    pub embeddings: Option<PathBuf>,
    pub k: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub scorer: ScorerKind,
    pub observed: ObservedSplit,
    pub normalization: NormKind,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

/// Settings recorded in every output artifact.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub k: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub scorer: ScorerKind,
    pub observed: ObservedSplit,
}

impl RunConfig {
    pub fn resolve(flags: RunArgs) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                // relative paths in the file are relative to the file
                let mut parsed: RunArgs =
                    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                let base = path.parent().unwrap_or(Path::new(""));
                for p in [&mut parsed.dataset, &mut parsed.embeddings, &mut parsed.out]
                    .into_iter()
                    .flatten()
                {
                    if p.is_relative() {
                        *p = base.join(&*p);
                    }
                }
                parsed
            }
            None => RunArgs::default(),
        };
        let a = flags.or(file);
        let config = Self {
            dataset: a.dataset,
            cumulative: a.cumulative.unwrap_or(true),
            embeddings: a.embeddings,
            k: a.k.unwrap_or(ExecConfig::default().k),
            epsilon: a.epsilon.unwrap_or(DEFAULT_EPSILON),
            seed: a.seed.unwrap_or(0),
            scorer: a.scorer.unwrap_or(ScorerKind::Complex),
            observed: a.observed.unwrap_or(ObservedSplit::Valid),
            normalization: a.normalization.unwrap_or(NormKind::Minmax),
            out: a.out,
            workers: a.workers,
        };
        config.exec().validate()?;
        if config.workers == Some(0) {
            bail!("--workers must be at least 1");
        }
        Ok(config)
    }

    pub fn exec(&self) -> ExecConfig {
        ExecConfig {
            k: self.k,
            epsilon: self.epsilon,
        }
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            k: self.k,
            epsilon: self.epsilon,
            seed: self.seed,
            scorer: self.scorer,
            observed: self.observed,
        }
    }

    pub fn dataset_dir(&self) -> Result<&Path> {
        let dir = self.dataset.as_deref().context("--dataset is required")?;
        if !dir.is_dir() {
            bail!("dataset directory {} does not exist", dir.display());
        }
        Ok(dir)
    }

    pub fn load_dataset(&self) -> Result<DatasetBundle> {
        let dir = self.dataset_dir()?;
        Ok(DatasetBundle::load(dir, self.cumulative)?)
    }

    /// Human-readable dataset name: the directory's last component.
    pub fn dataset_name(&self) -> String {
        self.dataset
            .as_deref()
            .and_then(Path::file_name)
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    }

    pub fn graphs<'b>(&self, bundle: &'b DatasetBundle) -> (&'b TripleGraph, &'b TripleGraph) {
        (
            bundle.graph(self.observed.observed()),
            bundle.graph(self.observed.full()),
        )
    }

    pub fn scorer<'b>(&self, bundle: &'b DatasetBundle) -> Result<Box<dyn AtomScorer + 'b>> {
        let (observed, full) = self.graphs(bundle);
        Ok(match self.scorer {
            ScorerKind::Complex => {
                let path = self
                    .embeddings
                    .as_deref()
                    .context("--scorer complex needs --embeddings")?;
                let table = EmbeddingTable::read(path)?;
                if table.num_entities() != bundle.entity_count() || table.num_relations() != bundle.relation_count() {
                    bail!(
                        "embeddings cover {} entities and {} relations, dataset has {} and {}",
                        table.num_entities(),
                        table.num_relations(),
                        bundle.entity_count(),
                        bundle.relation_count()
                    );
                }
                let norm = match self.normalization {
                    NormKind::Minmax => Normalization::MinMax,
                    NormKind::Sigmoid => Normalization::Sigmoid,
                };
                Box::new(ComplexScorer::new(table, norm))
            }
            ScorerKind::Oracle => Box::new(OracleScorer::new(full, observed, self.seed)?),
            ScorerKind::Symbolic => Box::new(SymbolicScorer::new(full, self.epsilon)),
        })
    }
}
