use std::collections::HashMap;

use super::{AtomScorer, Provenance, ScoreError, ScoreVector};
use crate::kg::{EntityId, RelationId, TripleGraph};

/// `1` on `neighbors(s, p)`, `epsilon` everywhere else.
pub fn symbolic_scores(graph: &TripleGraph, s: EntityId, p: RelationId, epsilon: f64) -> ScoreVector {
    let mut values = vec![epsilon; graph.num_entities()];
    for o in graph.neighbors(s, p) {
        values[o.index()] = 1.0;
    }
    ScoreVector::new(values, Provenance::Symbolic)
}

/// Graph lookup exposed through the scorer interface, so a graph can stand
/// in for the link predictor.
#[derive(Clone, Copy, Debug)]
pub struct SymbolicScorer<'g> {
    graph: &'g TripleGraph,
    epsilon: f64,
}

impl<'g> SymbolicScorer<'g> {
    pub fn new(graph: &'g TripleGraph, epsilon: f64) -> Self {
        Self { graph, epsilon }
    }
}

impl AtomScorer for SymbolicScorer<'_> {
    fn num_entities(&self) -> usize {
        self.graph.num_entities()
    }

    fn score_objects(&self, subject: EntityId, predicate: RelationId) -> Result<ScoreVector, ScoreError> {
        check_ids(
            subject,
            predicate,
            self.graph.num_entities(),
            self.graph.num_relations(),
        )?;
        let mut v = symbolic_scores(self.graph, subject, predicate, self.epsilon);
        v.provenance = Provenance::Neural;
        Ok(v)
    }
}

/// Fixed score vectors per `(subject, predicate)`, with a constant fallback.
#[derive(Clone, Debug)]
pub struct PrecomputedScorer {
    num_entities: usize,
    fallback: f64,
    table: HashMap<(EntityId, RelationId), ScoreVector>,
}

impl PrecomputedScorer {
    pub fn new(num_entities: usize, fallback: f64) -> Self {
        Self {
            num_entities,
            fallback,
            table: HashMap::new(),
        }
    }

    pub fn insert(&mut self, s: EntityId, p: RelationId, values: Vec<f64>) -> Result<(), ScoreError> {
        if values.len() != self.num_entities {
            return Err(ScoreError::DimensionMismatch(format!(
                "{} scores for {} entities",
                values.len(),
                self.num_entities
            )));
        }
        self.table.insert((s, p), ScoreVector::new(values, Provenance::Neural));
        Ok(())
    }
}

impl AtomScorer for PrecomputedScorer {
    fn num_entities(&self) -> usize {
        self.num_entities
    }

    fn score_objects(&self, subject: EntityId, predicate: RelationId) -> Result<ScoreVector, ScoreError> {
        Ok(self
            .table
            .get(&(subject, predicate))
            .cloned()
            .unwrap_or_else(|| ScoreVector::new(vec![self.fallback; self.num_entities], Provenance::Neural)))
    }
}

pub(super) fn check_ids(s: EntityId, p: RelationId, entities: usize, relations: usize) -> Result<(), ScoreError> {
    if s.index() >= entities {
        return Err(ScoreError::OutOfRange {
            kind: "entity",
            id: s.0,
            size: entities,
        });
    }
    if p.index() >= relations {
        return Err(ScoreError::OutOfRange {
            kind: "relation",
            id: p.0,
            size: relations,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{Split, Triple};
    use proptest::prelude::*;

    #[test]
    fn single_edge() {
        let g = TripleGraph::from_triples(Split::Train, 3, 1, [Triple::new(0, 0, 1)]);
        let v = symbolic_scores(&g, EntityId(0), RelationId(0), 1e-6);
        assert_eq!(v.values(), &[1e-6, 1.0, 1e-6]);
        assert_eq!(v.provenance(), Provenance::Symbolic);
        let none = symbolic_scores(&g, EntityId(1), RelationId(0), 1e-6);
        assert!(none.iter().all(|&x| x == 1e-6));
    }

    #[test]
    fn precomputed_falls_back_to_constant() {
        let mut s = PrecomputedScorer::new(2, 0.5);
        s.insert(EntityId(0), RelationId(0), vec![0.1, 0.9]).unwrap();
        assert_eq!(
            s.score_objects(EntityId(0), RelationId(0)).unwrap().values(),
            &[0.1, 0.9]
        );
        assert_eq!(
            s.score_objects(EntityId(1), RelationId(0)).unwrap().values(),
            &[0.5, 0.5]
        );
        assert!(s.insert(EntityId(0), RelationId(1), vec![0.0]).is_err());
    }

    proptest! {
        #[test]
        fn ones_exactly_on_neighbors(edges in prop::collection::vec((0u32..8, 0u32..3, 0u32..8), 0..40)) {
            let g = TripleGraph::from_triples(Split::Test, 8, 3, edges.iter().map(|&(s, p, o)| Triple::new(s, p, o)));
            for s in 0..8 {
                for p in 0..3 {
                    let v = symbolic_scores(&g, EntityId(s), RelationId(p), 1e-6);
                    for o in 0..8u32 {
                        let expected = if g.contains(EntityId(s), RelationId(p), EntityId(o)) { 1.0 } else { 1e-6 };
                        prop_assert_eq!(v[o as usize], expected);
                    }
                }
            }
        }
    }
}
