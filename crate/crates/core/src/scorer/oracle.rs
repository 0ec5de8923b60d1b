//! Noisy but well-informed link predictor for tests and synthetic runs.
//!
//! The oracle knows a hidden complete graph. Edges of the hidden graph score
//! about 0.9, everything else about 0.1, with a small deterministic jitter
//! derived from `(seed, s, p, o)` so scores never depend on call order.

use super::symbolic::check_ids;
use super::{AtomScorer, Provenance, ScoreError, ScoreVector};
use crate::kg::{EntityId, RelationId, TripleGraph};

pub const HIDDEN_EDGE_SCORE: f64 = 0.9;
pub const NON_EDGE_SCORE: f64 = 0.1;
/// Upper bound of the uniform jitter.
pub const JITTER: f64 = 0.05;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform in `[0, JITTER]`, a pure function of its inputs.
fn jitter(seed: u64, s: EntityId, p: RelationId, o: EntityId) -> f64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ s.0 as u64);
    h = splitmix64(h ^ ((p.0 as u64) << 32));
    h = splitmix64(h ^ o.0 as u64);
    (h >> 11) as f64 / (1u64 << 53) as f64 * JITTER
}

/// Oracle scores for `(s, p, ·)`. Edges already present in `observed` get
/// `observed_boost` on top of the hidden-edge score, so a predictor can tell
/// memorised links from inferred ones. Results are clipped to `[0, 1]`.
pub fn oracle_scores(
    hidden: &TripleGraph,
    observed: &TripleGraph,
    s: EntityId,
    p: RelationId,
    seed: u64,
    observed_boost: f64,
) -> ScoreVector {
    let mut values: Vec<f64> = (0..hidden.num_entities() as u32)
        .map(|o| NON_EDGE_SCORE + jitter(seed, s, p, EntityId(o)))
        .collect();
    for &o in hidden.neighbors(s, p) {
        values[o.index()] = HIDDEN_EDGE_SCORE + jitter(seed, s, p, o);
    }
    if observed_boost != 0.0 {
        for &o in observed.neighbors(s, p) {
            values[o.index()] += observed_boost;
        }
    }
    for v in &mut values {
        *v = v.clamp(0.0, 1.0);
    }
    ScoreVector::new(values, Provenance::Neural)
}

#[derive(Clone, Copy, Debug)]
pub struct OracleScorer<'g> {
    hidden: &'g TripleGraph,
    observed: &'g TripleGraph,
    seed: u64,
    observed_boost: f64,
}

impl<'g> OracleScorer<'g> {
    /// Default boost for observed edges.
    pub const OBSERVED_BOOST: f64 = 0.05;

    /// Fails unless every observed triple is also hidden.
    pub fn new(hidden: &'g TripleGraph, observed: &'g TripleGraph, seed: u64) -> Result<Self, ScoreError> {
        let missing = observed.count_missing_from(hidden);
        if missing > 0 {
            return Err(ScoreError::ObservedNotSubset(missing));
        }
        Ok(Self {
            hidden,
            observed,
            seed,
            observed_boost: Self::OBSERVED_BOOST,
        })
    }

    pub fn with_observed_boost(mut self, boost: f64) -> Self {
        self.observed_boost = boost;
        self
    }
}

impl AtomScorer for OracleScorer<'_> {
    fn num_entities(&self) -> usize {
        self.hidden.num_entities()
    }

    fn score_objects(&self, subject: EntityId, predicate: RelationId) -> Result<ScoreVector, ScoreError> {
        check_ids(
            subject,
            predicate,
            self.hidden.num_entities(),
            self.hidden.num_relations(),
        )?;
        Ok(oracle_scores(
            self.hidden,
            self.observed,
            subject,
            predicate,
            self.seed,
            self.observed_boost,
        ))
    }
}
