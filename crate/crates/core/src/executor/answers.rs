use std::collections::BTreeSet;

use serde::Serialize;

use crate::kg::{EntityId, TripleGraph};
use crate::query::{AnswerSets, Combiner, QueryGraph, QueryInstance, Term};

/// Exact answer set of `query` on `graph` under crisp set semantics: no
/// beam, no scores.
pub fn symbolic_answers(query: &QueryGraph, graph: &TripleGraph) -> BTreeSet<EntityId> {
    let mut bindings: Vec<BTreeSet<EntityId>> = vec![BTreeSet::new(); query.vars().len()];
    for step in &query.plan().steps {
        let mut per_atom = step.atoms.iter().map(|&id| {
            let atom = &query.atoms()[id];
            match atom.subject {
                Term::Anchor(e) => graph.neighbors(e, atom.predicate).iter().copied().collect(),
                Term::Var(u) => bindings[u]
                    .iter()
                    .flat_map(|&s| graph.neighbors(s, atom.predicate).iter().copied())
                    .collect::<BTreeSet<_>>(),
            }
        });
        let first = per_atom.next().expect("steps have atoms");
        bindings[step.var] = per_atom.fold(first, |acc, set| match step.combiner {
            Combiner::And => acc.intersection(&set).copied().collect(),
            Combiner::Or => acc.union(&set).copied().collect(),
        });
    }
    std::mem::take(&mut bindings[query.target()])
}

/// Answer sets recomputed from the graphs, next to the labels a dataset
/// shipped with.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HardnessAudit {
    /// Answers on the observed graph.
    pub easy: BTreeSet<EntityId>,
    /// Answers on the full graph that the observed graph does not reach.
    pub hard: BTreeSet<EntityId>,
    /// Labelled hard answers that the observed graph already reaches.
    pub not_genuinely_hard: BTreeSet<EntityId>,
}

impl HardnessAudit {
    pub fn answer_sets(&self) -> AnswerSets {
        AnswerSets::new(self.easy.clone(), self.hard.clone()).expect("disjoint by construction")
    }
}

pub fn classify_answers(query: &QueryInstance, observed: &TripleGraph, full: &TripleGraph) -> HardnessAudit {
    let easy = symbolic_answers(query.graph(), observed);
    let hard = symbolic_answers(query.graph(), full)
        .difference(&easy)
        .copied()
        .collect();
    let not_genuinely_hard = query.answers().hard().intersection(&easy).copied().collect();
    HardnessAudit {
        easy,
        hard,
        not_genuinely_hard,
    }
}
