use std::collections::BTreeSet;

use serde::Serialize;

use super::model::{Atom, AtomId, Term, VarId};
use super::QueryError;

/// How the atoms constraining one variable are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Combiner {
    /// Product t-norm.
    And,
    /// Product t-conorm.
    Or,
}

/// Resolution of one variable from the atoms whose object it is.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanStep {
    pub var: VarId,
    pub atoms: Vec<AtomId>,
    pub combiner: Combiner,
}

/// Variable resolution order. Every step comes after the steps of the
/// variables its atoms read from; the answer variable is resolved last.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecutionPlan {
    pub steps: Vec<PlanStep>,
}

impl ExecutionPlan {
    pub fn step_of(&self, var: VarId) -> Option<usize> {
        self.steps.iter().position(|s| s.var == var)
    }

    pub fn target_step(&self) -> &PlanStep {
        self.steps.last().expect("plans are never empty")
    }

    /// Clauses the plan denotes once its combiners are distributed out.
    pub fn expanded_dnf(&self) -> Vec<Vec<AtomId>> {
        let mut clauses: Vec<Vec<AtomId>> = vec![Vec::new()];
        for step in &self.steps {
            clauses = match step.combiner {
                Combiner::And => clauses
                    .into_iter()
                    .map(|mut c| {
                        c.extend(&step.atoms);
                        c
                    })
                    .collect(),
                Combiner::Or => clauses
                    .iter()
                    .flat_map(|c| {
                        step.atoms.iter().map(move |&a| {
                            let mut c = c.clone();
                            c.push(a);
                            c
                        })
                    })
                    .collect(),
            };
        }
        for c in &mut clauses {
            c.sort_unstable();
        }
        clauses.sort();
        clauses
    }
}

pub(crate) fn build(
    vars: &[String],
    target: VarId,
    atoms: &[Atom],
    dnf: &[Vec<AtomId>],
) -> Result<ExecutionPlan, QueryError> {
    let n = vars.len();
    let mut constraining: Vec<Vec<AtomId>> = vec![Vec::new(); n];
    let mut preds: Vec<BTreeSet<VarId>> = vec![BTreeSet::new(); n];
    for a in atoms {
        let v = a.object_var();
        constraining[v].push(a.id);
        if let Term::Var(u) = a.subject {
            preds[v].insert(u);
        }
    }
    if let Some(v) = (0..n).find(|&v| constraining[v].is_empty()) {
        return Err(QueryError::UnboundVariable(vars[v].clone()));
    }

    // Kahn's algorithm, lowest variable index first among ready ones.
    let mut remaining: Vec<usize> = preds.iter().map(BTreeSet::len).collect();
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let next = (0..n)
            .filter(|&v| !done[v] && remaining[v] == 0)
            .min_by_key(|&v| (v == target, v))
            .ok_or(QueryError::CyclicDependency)?;
        done[next] = true;
        order.push(next);
        for v in 0..n {
            if preds[v].contains(&next) {
                remaining[v] -= 1;
            }
        }
    }
    let mut is_subject = vec![false; n];
    for a in atoms {
        if let Term::Var(u) = a.subject {
            is_subject[u] = true;
        }
    }
    if let Some(v) = (0..n).find(|&v| v != target && !is_subject[v]) {
        return Err(QueryError::UnknownShape(format!(
            "variable `{}` does not lead to the answer variable",
            vars[v]
        )));
    }
    debug_assert_eq!(order.last(), Some(&target));

    let co_occur = |a: AtomId, b: AtomId| dnf.iter().any(|c| c.contains(&a) && c.contains(&b));
    let steps = order
        .into_iter()
        .map(|var| {
            let ids = constraining[var].clone();
            let pairs: Vec<bool> = ids
                .iter()
                .enumerate()
                .flat_map(|(i, &a)| ids[i + 1..].iter().map(move |&b| (a, b)))
                .map(|(a, b)| co_occur(a, b))
                .collect();
            let combiner = if pairs.iter().all(|&c| c) {
                Combiner::And
            } else if pairs.iter().all(|&c| !c) {
                Combiner::Or
            } else {
                return Err(QueryError::InvalidDnf(format!(
                    "atoms constraining `{}` mix conjunction and disjunction",
                    vars[var]
                )));
            };
            Ok(PlanStep {
                var,
                atoms: ids,
                combiner,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let plan = ExecutionPlan { steps };
    if plan.expanded_dnf() != dnf {
        return Err(QueryError::InvalidDnf(
            "clauses are not the expansion of a per-variable plan".into(),
        ));
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{EntityId, RelationId};
    use crate::query::QueryGraph;

    fn e(i: u32) -> Term {
        Term::Anchor(EntityId(i))
    }
    fn v(i: usize) -> Term {
        Term::Var(i)
    }
    fn graph(
        nvars: usize,
        target: usize,
        atoms: Vec<(Term, Term)>,
        dnf: Vec<Vec<usize>>,
    ) -> Result<QueryGraph, QueryError> {
        let names = (0..nvars).map(|i| format!("V{i}")).collect();
        let atoms = atoms
            .into_iter()
            .enumerate()
            .map(|(i, (s, o))| (s, RelationId(i as u32), o))
            .collect();
        QueryGraph::new(names, target, atoms, dnf)
    }

    #[test]
    fn two_hop_plan() {
        let g = graph(2, 1, vec![(e(0), v(0)), (v(0), v(1))], vec![vec![0, 1]]).unwrap();
        let steps = &g.plan().steps;
        assert_eq!(steps.len(), 2);
        assert_eq!((steps[0].var, steps[0].atoms.clone()), (0, vec![0]));
        assert_eq!((steps[1].var, steps[1].atoms.clone()), (1, vec![1]));
    }

    #[test]
    fn three_way_intersection_is_one_and_level() {
        let g = graph(
            1,
            0,
            vec![(e(0), v(0)), (e(1), v(0)), (e(2), v(0))],
            vec![vec![0, 1, 2]],
        )
        .unwrap();
        let steps = &g.plan().steps;
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].atoms, vec![0, 1, 2]);
        assert_eq!(steps[0].combiner, Combiner::And);
    }

    #[test]
    fn union_then_projection() {
        let g = graph(
            2,
            1,
            vec![(e(0), v(0)), (e(1), v(0)), (v(0), v(1))],
            vec![vec![0, 2], vec![1, 2]],
        )
        .unwrap();
        let steps = &g.plan().steps;
        assert_eq!(steps[0].atoms, vec![0, 1]);
        assert_eq!(steps[0].combiner, Combiner::Or);
        assert_eq!(steps[1].atoms, vec![2]);
        assert_eq!(steps[1].combiner, Combiner::And);
    }

    #[test]
    fn inconsistent_dnf_is_rejected() {
        // union clauses that do not carry the shared projection atom
        let err = graph(
            2,
            1,
            vec![(e(0), v(0)), (e(1), v(0)), (v(0), v(1))],
            vec![vec![0, 2], vec![1]],
        );
        assert!(matches!(err, Err(QueryError::InvalidDnf(_))));
    }

    #[test]
    fn cycles_are_detected() {
        // V0 -> V1 -> V0 plus a sink V2
        let err = graph(
            3,
            2,
            vec![(v(1), v(0)), (v(0), v(1)), (v(1), v(2))],
            vec![vec![0, 1, 2]],
        );
        assert_eq!(err.unwrap_err(), QueryError::CyclicDependency);
    }

    #[test]
    fn unconstrained_variable_is_unbound() {
        // V0 only ever appears as a subject
        let err = graph(2, 1, vec![(v(0), v(1))], vec![vec![0]]);
        assert!(matches!(err, Err(QueryError::UnboundVariable(_))));
    }
}
