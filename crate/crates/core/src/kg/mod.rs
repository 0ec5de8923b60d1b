//! In-memory triple store.
//!
//! Entities and relations get dense integer ids from dictionary files, never
//! from discovery order, so two machines loading the same dataset agree on
//! every id. Graphs are immutable once built and can be shared freely across
//! worker threads.

mod dataset;
mod dictionary;
mod graph;

pub use dataset::{DatasetBundle, DatasetSummary, ENTITY_DICT_FILE, RELATION_DICT_FILE};
pub use dictionary::Dictionary;
pub use graph::{Triple, TripleGraph};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense entity index into the entity dictionary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

/// Dense relation index into the relation dictionary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e:{}", self.0)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r:{}", self.0)
    }
}

/// Which split a graph was loaded from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    /// File name of the triple file for this split inside a dataset directory.
    pub fn file_name(self) -> &'static str {
        match self {
            Split::Train => "train.tsv",
            Split::Valid => "valid.tsv",
            Split::Test => "test.tsv",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = KgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(KgError::UnknownSplit(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum KgError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("label `{label}` is not in the dictionary ({path}:{line})")]
    MissingDictionaryEntry { label: String, path: PathBuf, line: usize },
    #[error("malformed row at {path}:{line}: {reason}")]
    MalformedRow { path: PathBuf, line: usize, reason: String },
    #[error("malformed dictionary {path}:{line}: {reason}")]
    MalformedDictionary { path: PathBuf, line: usize, reason: String },
    #[error("duplicate dictionary label `{0}`")]
    DuplicateLabel(String),
    #[error("{missing} triples of the {lower} split are absent from the {upper} split")]
    SplitNotMonotone { lower: Split, upper: Split, missing: usize },
    #[error("unknown split `{0}` (expected train, valid or test)")]
    UnknownSplit(String),
}

impl KgError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KgError::Io {
            path: path.into(),
            source,
        }
    }
}
