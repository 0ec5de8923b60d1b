use std::collections::HashMap;
use std::sync::RwLock;

use super::{AtomScorer, ScoreError, ScoreVector};
use crate::kg::{EntityId, RelationId};

/// Memoises `(subject, predicate)` score vectors of an inner scorer.
///
/// Coalition executions of one query ask for the same atoms many times;
/// vectors are reference counted so a hit costs one map lookup.
pub struct CachedScorer<S> {
    inner: S,
    cache: RwLock<HashMap<(EntityId, RelationId), ScoreVector>>,
}

impl<S: AtomScorer> CachedScorer<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    pub fn len(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<S: AtomScorer> AtomScorer for CachedScorer<S> {
    fn num_entities(&self) -> usize {
        self.inner.num_entities()
    }

    fn score_objects(&self, subject: EntityId, predicate: RelationId) -> Result<ScoreVector, ScoreError> {
        if let Some(v) = self.cache.read().expect("cache lock").get(&(subject, predicate)) {
            return Ok(v.clone());
        }
        // computed outside the lock; concurrent misses may both compute
        let v = self.inner.score_objects(subject, predicate)?;
        Ok(self
            .cache
            .write()
            .expect("cache lock")
            .entry((subject, predicate))
            .or_insert(v)
            .clone())
    }

    fn score_objects_batch(
        &self,
        subjects: &[EntityId],
        predicate: RelationId,
    ) -> Result<Vec<ScoreVector>, ScoreError> {
        let mut out: Vec<Option<ScoreVector>> = {
            let cache = self.cache.read().expect("cache lock");
            subjects.iter().map(|&s| cache.get(&(s, predicate)).cloned()).collect()
        };
        let mut missing: Vec<EntityId> = subjects
            .iter()
            .zip(&out)
            .filter(|(_, hit)| hit.is_none())
            .map(|(&s, _)| s)
            .collect();
        missing.sort_unstable();
        missing.dedup();
        if !missing.is_empty() {
            let fresh = self.inner.score_objects_batch(&missing, predicate)?;
            let mut cache = self.cache.write().expect("cache lock");
            for (s, v) in missing.into_iter().zip(fresh) {
                cache.entry((s, predicate)).or_insert(v);
            }
            for (slot, &s) in out.iter_mut().zip(subjects) {
                if slot.is_none() {
                    *slot = Some(cache[&(s, predicate)].clone());
                }
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::PrecomputedScorer;

    #[test]
    fn hits_return_the_same_vector() {
        let c = CachedScorer::new(PrecomputedScorer::new(3, 0.2));
        let a = c.score_objects(EntityId(0), RelationId(0)).unwrap();
        let b = c.score_objects(EntityId(0), RelationId(0)).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(c.len(), 1);
        c.score_objects(EntityId(1), RelationId(0)).unwrap();
        assert_eq!(c.len(), 2);
        let batch = c
            .score_objects_batch(&[EntityId(2), EntityId(0), EntityId(2)], RelationId(0))
            .unwrap();
        assert_eq!(batch.len(), 3);
        assert_eq!(c.len(), 3);
    }
}
