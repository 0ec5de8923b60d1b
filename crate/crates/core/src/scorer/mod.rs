//! Per-atom score vectors.
//!
//! Every scorer answers the same question: given a subject entity and a
//! relation, how plausible is each entity as the object? Neural scorers are
//! normalised to `[0, 1]` so they compose with the `{1, ε}` scores of
//! symbolic lookups under the product t-norm.

mod cache;
mod complex;
mod oracle;
mod symbolic;

pub use cache::CachedScorer;
pub use complex::{neural_scores, ComplexScorer, EmbeddingTable};
pub use oracle::{oracle_scores, OracleScorer};
pub use symbolic::{symbolic_scores, PrecomputedScorer, SymbolicScorer};

use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{EntityId, RelationId};

/// Default score for entities a symbolic lookup does not reach.
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Neural,
    Symbolic,
}

/// One score per entity, indexed by entity id.
#[derive(Clone, Debug)]
pub struct ScoreVector {
    values: Arc<[f64]>,
    provenance: Provenance,
}

impl ScoreVector {
    pub fn new(values: impl Into<Arc<[f64]>>, provenance: Provenance) -> Self {
        let values = values.into();
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { values, provenance }
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Deref for ScoreVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

/// How raw link-prediction scores are mapped into `[0, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Per-call min-max over the candidate vector.
    #[default]
    MinMax,
    Sigmoid,
}

impl Normalization {
    pub fn apply(self, raw: &[f32]) -> Vec<f64> {
        match self {
            Normalization::MinMax => min_max(raw),
            Normalization::Sigmoid => raw.iter().map(|&x| 1.0 / (1.0 + (-(x as f64)).exp())).collect(),
        }
    }
}

/// Min-max scaling. A constant vector maps to all-ones when the constant is
/// positive and to all-zeros otherwise.
pub fn min_max(raw: &[f32]) -> Vec<f64> {
    let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x as f64), hi.max(x as f64))
    });
    if raw.is_empty() {
        return Vec::new();
    }
    if hi > lo {
        let span = hi - lo;
        raw.iter().map(|&x| (x as f64 - lo) / span).collect()
    } else {
        let fill = if lo > 0.0 { 1.0 } else { 0.0 };
        vec![fill; raw.len()]
    }
}

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{kind} id {id} out of range (size {size})")]
    OutOfRange { kind: &'static str, id: u32, size: usize },
    #[error("embedding table contains non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("embedding file {path}: {message}")]
    Format { path: String, message: String },
    #[error("observed graph is not contained in the hidden graph ({0} triples missing)")]
    ObservedNotSubset(usize),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Link predictor for single atoms `p(s, ?)`.
pub trait AtomScorer: Send + Sync {
    fn num_entities(&self) -> usize;

    /// Scores in `[0, 1]` for every candidate object.
    fn score_objects(&self, subject: EntityId, predicate: RelationId) -> Result<ScoreVector, ScoreError>;

    /// One vector per subject. Scorers that stream a large table override
    /// this to make a single pass for the whole batch.
    fn score_objects_batch(
        &self,
        subjects: &[EntityId],
        predicate: RelationId,
    ) -> Result<Vec<ScoreVector>, ScoreError> {
        subjects.iter().map(|&s| self.score_objects(s, predicate)).collect()
    }
}

impl<T: AtomScorer + ?Sized> AtomScorer for &T {
    fn num_entities(&self) -> usize {
        (**self).num_entities()
    }

    fn score_objects(&self, subject: EntityId, predicate: RelationId) -> Result<ScoreVector, ScoreError> {
        (**self).score_objects(subject, predicate)
    }

    fn score_objects_batch(
        &self,
        subjects: &[EntityId],
        predicate: RelationId,
    ) -> Result<Vec<ScoreVector>, ScoreError> {
        (**self).score_objects_batch(subjects, predicate)
    }
}

impl<T: AtomScorer + ?Sized> AtomScorer for Box<T> {
    fn num_entities(&self) -> usize {
        (**self).num_entities()
    }

    fn score_objects(&self, subject: EntityId, predicate: RelationId) -> Result<ScoreVector, ScoreError> {
        (**self).score_objects(subject, predicate)
    }

    fn score_objects_batch(
        &self,
        subjects: &[EntityId],
        predicate: RelationId,
    ) -> Result<Vec<ScoreVector>, ScoreError> {
        (**self).score_objects_batch(subjects, predicate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn min_max_degenerate_cases() {
        assert_eq!(min_max(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(min_max(&[2.5, 2.5]), vec![1.0, 1.0]);
        assert_eq!(min_max(&[-1.0, -1.0]), vec![0.0, 0.0]);
        assert_eq!(min_max(&[1.0, 0.0]), vec![1.0, 0.0]);
    }

    proptest! {
        #[test]
        fn min_max_stays_in_unit_interval_and_keeps_order(raw in prop::collection::vec(-50.0f32..50.0, 1..40)) {
            let n = min_max(&raw);
            prop_assert!(n.iter().all(|&x| (0.0..=1.0).contains(&x)));
            for i in 0..raw.len() {
                for j in 0..raw.len() {
                    if raw[i] < raw[j] {
                        prop_assert!(n[i] < n[j]);
                    }
                }
            }
        }

        #[test]
        fn sigmoid_stays_in_unit_interval(raw in prop::collection::vec(-50.0f32..50.0, 1..40)) {
            prop_assert!(Normalization::Sigmoid.apply(&raw).iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }
}
