use std::collections::BTreeSet;

use super::{ExecError, RankedAnswers};
use crate::kg::EntityId;
use crate::query::AnswerSets;

/// All entities except an explicit exclusion set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidates {
    num_entities: usize,
    excluded: BTreeSet<EntityId>,
}

impl Candidates {
    pub fn all(num_entities: usize) -> Self {
        Self {
            num_entities,
            excluded: BTreeSet::new(),
        }
    }

    pub fn excluding<I: IntoIterator<Item = EntityId>>(mut self, entities: I) -> Self {
        self.excluded
            .extend(entities.into_iter().filter(|e| e.index() < self.num_entities));
        self
    }

    pub fn contains(&self, e: EntityId) -> bool {
        e.index() < self.num_entities && !self.excluded.contains(&e)
    }

    pub fn excluded(&self) -> &BTreeSet<EntityId> {
        &self.excluded
    }

    pub fn len(&self) -> usize {
        self.num_entities - self.excluded.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = EntityId> + '_ {
        (0..self.num_entities as u32)
            .map(EntityId)
            .filter(|e| !self.excluded.contains(e))
    }
}

/// Filtered setting: every known answer except `target` is removed, so
/// other correct answers cannot push the target down.
pub fn filtered_candidates(num_entities: usize, answers: &AnswerSets, target: EntityId) -> Candidates {
    Candidates::all(num_entities).excluding(
        answers
            .easy()
            .iter()
            .chain(answers.hard())
            .copied()
            .filter(|&e| e != target),
    )
}

/// One plus the number of other candidates scoring strictly higher than
/// `target`; ties resolve in the target's favour.
pub fn rank_of(answers: &RankedAnswers, candidates: &Candidates, target: EntityId) -> Result<usize, ExecError> {
    if !candidates.contains(target) {
        return Err(ExecError::TargetFiltered(target));
    }
    let z = answers.score(target).ok_or(ExecError::UnknownEntity(target))?;
    let shadowed = candidates
        .excluded()
        .iter()
        .filter(|e| answers.score(**e).is_some_and(|v| v > z))
        .count();
    Ok(answers.count_above(z) - shadowed + 1)
}
