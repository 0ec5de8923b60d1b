use std::cmp::Ordering;

use serde::Serialize;

use super::{Coalition, ExecConfig, ExecError};
use crate::kg::{EntityId, TripleGraph};
use crate::query::{AtomId, Combiner, QueryGraph, Term, VarId};
use crate::scorer::{symbolic_scores, AtomScorer, Provenance, ScoreVector};

/// Per-atom contribution to one variable, kept for path reconstruction.
#[derive(Clone, Debug)]
struct AtomTrace {
    atom: AtomId,
    neural: bool,
    /// Best value reaching each entity through this atom, beam factor included.
    values: ScoreVector,
    projection: Option<Projection>,
}

#[derive(Clone, Debug)]
struct Projection {
    source_var: VarId,
    /// Entity of `source_var` that produced `values[o]`.
    source: Vec<u32>,
    /// Atom score on the edge from `source[o]` to `o`.
    atom_scores: Vec<f64>,
}

#[derive(Clone, Debug)]
struct StepTrace {
    var: VarId,
    combiner: Combiner,
    atoms: Vec<AtomTrace>,
    combined: Vec<f64>,
}

/// Scores of every entity as an answer to one partial query.
#[derive(Clone, Debug)]
pub struct RankedAnswers {
    coalition: Coalition,
    scores: Vec<f64>,
    /// `scores` in ascending order, for logarithmic rank counting.
    sorted: Vec<f64>,
    steps: Vec<StepTrace>,
}

impl RankedAnswers {
    pub fn coalition(&self) -> Coalition {
        self.coalition
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn score(&self, e: EntityId) -> Option<f64> {
        self.scores.get(e.index()).copied()
    }

    pub fn num_entities(&self) -> usize {
        self.scores.len()
    }

    /// Number of entities scoring strictly above `z`.
    pub fn count_above(&self, z: f64) -> usize {
        self.sorted.len() - self.sorted.partition_point(|&v| v <= z)
    }

    /// Beam of an intermediate variable: `(entity, score)` by descending
    /// score, ties by ascending entity.
    pub fn beam(&self, var: VarId, k: usize) -> Option<Vec<(EntityId, f64)>> {
        let step = self.steps.iter().find(|s| s.var == var)?;
        Some(top_k(&step.combined, k))
    }
}

/// One atom on the best path to an answer.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathAtom {
    pub atom: AtomId,
    pub subject: Option<EntityId>,
    pub object: EntityId,
    pub score: f64,
    pub neural: bool,
}

/// The atoms that resolved one variable on the best path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathStep {
    pub var: VarId,
    pub entity: EntityId,
    pub combiner: Combiner,
    pub atoms: Vec<PathAtom>,
}

fn t_norm(a: f64, b: f64) -> f64 {
    a * b
}

// 1 - (1-a)(1-b) keeps a symbolic 1 exactly 1.
fn t_conorm(a: f64, b: f64) -> f64 {
    1.0 - (1.0 - a) * (1.0 - b)
}

fn by_score_then_index(scores: &[f64]) -> impl Fn(&u32, &u32) -> Ordering + '_ {
    move |&a, &b| {
        scores[b as usize]
            .partial_cmp(&scores[a as usize])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    }
}

fn top_k(scores: &[f64], k: usize) -> Vec<(EntityId, f64)> {
    let mut idx: Vec<u32> = (0..scores.len() as u32).collect();
    let cmp = by_score_then_index(scores);
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, &cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(&cmp);
    idx.into_iter().map(|e| (EntityId(e), scores[e as usize])).collect()
}

/// Runs `query` with the atoms in `coalition` scored by `scorer` and the
/// rest looked up in `observed`.
pub fn execute<S: AtomScorer + ?Sized>(
    query: &QueryGraph,
    coalition: Coalition,
    scorer: &S,
    observed: &TripleGraph,
    config: &ExecConfig,
) -> Result<RankedAnswers, ExecError> {
    config.validate()?;
    if coalition.bits() >> query.num_atoms().min(31) != 0 {
        return Err(ExecError::CoalitionOutOfRange {
            coalition: coalition.bits(),
            num_atoms: query.num_atoms(),
        });
    }
    let n = observed.num_entities();
    if !coalition.is_empty() && scorer.num_entities() != n {
        return Err(ExecError::EntityCountMismatch {
            scorer: scorer.num_entities(),
            graph: n,
        });
    }
    for a in query.atoms() {
        if let Term::Anchor(e) = a.subject {
            if e.index() >= n {
                return Err(ExecError::UnknownEntity(e));
            }
        }
    }

    let plan = query.plan();
    let target_step = plan.steps.len() - 1;
    let mut steps: Vec<StepTrace> = Vec::with_capacity(plan.steps.len());
    let mut beams: Vec<Option<Vec<(EntityId, f64)>>> = vec![None; query.vars().len()];

    for (level, step) in plan.steps.iter().enumerate() {
        let mut atoms = Vec::with_capacity(step.atoms.len());
        for &id in &step.atoms {
            let atom = &query.atoms()[id];
            let neural = coalition.contains(id);
            let score_many = |subjects: &[EntityId]| -> Result<Vec<ScoreVector>, ExecError> {
                if neural {
                    Ok(scorer.score_objects_batch(subjects, atom.predicate)?)
                } else {
                    Ok(subjects
                        .iter()
                        .map(|&s| symbolic_scores(observed, s, atom.predicate, config.epsilon))
                        .collect())
                }
            };
            let trace = match atom.subject {
                Term::Anchor(e) => {
                    let values = score_many(&[e])?.pop().expect("one vector");
                    check_len(&values, n)?;
                    AtomTrace {
                        atom: id,
                        neural,
                        values,
                        projection: None,
                    }
                }
                Term::Var(u) => {
                    let beam = beams[u].as_ref().expect("plan resolves sources first");
                    let subjects: Vec<EntityId> = beam.iter().map(|&(e, _)| e).collect();
                    let vectors = score_many(&subjects)?;
                    for v in &vectors {
                        check_len(v, n)?;
                    }
                    let (values, projection) = project(beam, &vectors, n, u);
                    let provenance = if neural {
                        Provenance::Neural
                    } else {
                        Provenance::Symbolic
                    };
                    AtomTrace {
                        atom: id,
                        neural,
                        values: ScoreVector::new(values, provenance),
                        projection: Some(projection),
                    }
                }
            };
            atoms.push(trace);
        }

        let combine = match step.combiner {
            Combiner::And => t_norm,
            Combiner::Or => t_conorm,
        };
        let mut combined = atoms[0].values.to_vec();
        for a in &atoms[1..] {
            for (c, &v) in combined.iter_mut().zip(a.values.iter()) {
                *c = combine(*c, v);
            }
        }
        if level != target_step {
            beams[step.var] = Some(top_k(&combined, config.k));
        }
        steps.push(StepTrace {
            var: step.var,
            combiner: step.combiner,
            atoms,
            combined,
        });
    }

    let scores = steps[target_step].combined.clone();
    let mut sorted = scores.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(RankedAnswers {
        coalition,
        scores,
        sorted,
        steps,
    })
}

fn check_len(v: &ScoreVector, n: usize) -> Result<(), ExecError> {
    if v.len() != n {
        return Err(ExecError::EntityCountMismatch {
            scorer: v.len(),
            graph: n,
        });
    }
    Ok(())
}

/// `values[o] = max_j beam_j · vectors_j[o]`, first maximising source wins.
fn project(beam: &[(EntityId, f64)], vectors: &[ScoreVector], n: usize, source_var: VarId) -> (Vec<f64>, Projection) {
    let mut values = vec![f64::NEG_INFINITY; n];
    let mut atom_scores = vec![0.0; n];
    let mut source = vec![0u32; n];
    for (&(u, b), vec) in beam.iter().zip(vectors) {
        for o in 0..n {
            let v = b * vec[o];
            if v > values[o] {
                values[o] = v;
                atom_scores[o] = vec[o];
                source[o] = u.0;
            }
        }
    }
    (
        values,
        Projection {
            source_var,
            source,
            atom_scores,
        },
    )
}

/// Reconstructs the best path to `target`: every atom's own score on the
/// bindings that produced `z(target)`, grouped by variable in plan order.
pub fn argmax_path(answers: &RankedAnswers, target: EntityId) -> Result<Vec<PathStep>, ExecError> {
    if target.index() >= answers.num_entities() {
        return Err(ExecError::UnknownEntity(target));
    }
    let mut bound: Vec<Option<EntityId>> = vec![None; answers.steps.len()];
    let last = answers.steps.len() - 1;
    bound[last] = Some(target);
    let mut out = Vec::new();
    // plans list sources before their consumers, so walk backwards
    for level in (0..=last).rev() {
        let Some(entity) = bound[level] else { continue };
        let step = &answers.steps[level];
        let mut atoms = Vec::with_capacity(step.atoms.len());
        for a in &step.atoms {
            let o = entity.index();
            let (subject, score) = match &a.projection {
                None => (None, a.values[o]),
                Some(p) => {
                    let src = EntityId(p.source[o]);
                    if let Some(l) = answers.steps.iter().position(|s| s.var == p.source_var) {
                        bound[l].get_or_insert(src);
                    }
                    (Some(src), p.atom_scores[o])
                }
            };
            atoms.push(PathAtom {
                atom: a.atom,
                subject,
                object: entity,
                score,
                neural: a.neural,
            });
        }
        out.push(PathStep {
            var: step.var,
            entity,
            combiner: step.combiner,
            atoms,
        });
    }
    out.reverse();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{RelationId, Split, Triple};
    use crate::query::{parse_query, Vocab};
    use crate::scorer::PrecomputedScorer;

    const EPS: f64 = 1e-6;

    fn vocab(n: usize, r: usize) -> Vocab<'static> {
        Vocab::Numeric {
            entities: n,
            relations: r,
        }
    }

    fn cfg(k: usize) -> ExecConfig {
        ExecConfig { k, epsilon: EPS }
    }

    #[test]
    fn two_hop_all_symbolic() {
        // A=0 -r0-> B=1 -r1-> D=3
        let g = TripleGraph::from_triples(Split::Valid, 4, 2, [Triple::new(0, 0, 1), Triple::new(1, 1, 3)]);
        let q = parse_query("?V2: exists V1 . r:0(e:0, V1) AND r:1(V1, V2)", &vocab(4, 2)).unwrap();
        let z = execute(
            q.graph(),
            Coalition::EMPTY,
            &PrecomputedScorer::new(4, 0.5),
            &g,
            &cfg(10),
        )
        .unwrap();
        assert_eq!(z.scores()[3], 1.0);
        // every other entity is reached through at least one ε edge
        for e in [0, 1, 2] {
            assert!(z.scores()[e] <= EPS, "{e}: {}", z.scores()[e]);
        }
        let path = argmax_path(&z, EntityId(3)).unwrap();
        assert_eq!(path.len(), 2);
        assert_eq!(path[0].entity, EntityId(1));
        assert_eq!(path[1].atoms[0].subject, Some(EntityId(1)));
        let product: f64 = path.iter().flat_map(|s| s.atoms.iter()).map(|a| a.score).product();
        assert_eq!(product, z.scores()[3]);
    }

    #[test]
    fn single_atom_empty_coalition_is_the_symbolic_vector() {
        use crate::query::QueryGraph;
        let g = TripleGraph::from_triples(Split::Valid, 5, 1, [Triple::new(2, 0, 4), Triple::new(2, 0, 1)]);
        let q = QueryGraph::new(
            vec!["V".into()],
            0,
            vec![(Term::Anchor(EntityId(2)), RelationId(0), Term::Var(0))],
            vec![vec![0]],
        )
        .unwrap();
        let z = execute(&q, Coalition::EMPTY, &PrecomputedScorer::new(5, 0.3), &g, &cfg(10)).unwrap();
        assert_eq!(
            z.scores(),
            symbolic_scores(&g, EntityId(2), RelationId(0), EPS).values()
        );
        let path = argmax_path(&z, EntityId(4)).unwrap();
        assert_eq!(path.len(), 1);
        assert_eq!(path[0].atoms[0].score, z.scores()[4]);
    }

    #[test]
    fn union_path_reports_both_branches() {
        let g = TripleGraph::from_triples(Split::Valid, 3, 2, [Triple::new(0, 0, 2)]);
        let q = parse_query("?V: r:0(e:0, V) OR r:1(e:1, V)", &vocab(3, 2)).unwrap();
        let z = execute(
            q.graph(),
            Coalition::EMPTY,
            &PrecomputedScorer::new(3, 0.5),
            &g,
            &cfg(10),
        )
        .unwrap();
        assert_eq!(z.scores()[2], 1.0);
        let path = argmax_path(&z, EntityId(2)).unwrap();
        assert_eq!(path[0].combiner, Combiner::Or);
        let scores: Vec<f64> = path[0].atoms.iter().map(|a| a.score).collect();
        assert_eq!(scores, vec![1.0, EPS]);
    }

    #[test]
    fn beam_ties_break_by_entity_index() {
        // twelve symbolic neighbours at score 1, k = 10 keeps entities 1..=10
        let edges: Vec<Triple> = (1..=12).map(|o| Triple::new(0, 0, o)).collect();
        let g = TripleGraph::from_triples(Split::Valid, 13, 2, edges);
        let q = parse_query("?V2: exists V1 . r:0(e:0, V1) AND r:1(V1, V2)", &vocab(13, 2)).unwrap();
        let z = execute(
            q.graph(),
            Coalition::EMPTY,
            &PrecomputedScorer::new(13, 0.5),
            &g,
            &cfg(10),
        )
        .unwrap();
        let beam = z.beam(0, 10).unwrap();
        let ids: Vec<u32> = beam.iter().map(|(e, _)| e.0).collect();
        assert_eq!(ids, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn neural_atoms_use_the_scorer() {
        let g = TripleGraph::from_triples(Split::Valid, 3, 1, []);
        let q = parse_query("?V: r:0(e:0, V) AND r:0(e:1, V)", &vocab(3, 1)).unwrap();
        let mut s = PrecomputedScorer::new(3, 0.0);
        s.insert(EntityId(0), RelationId(0), vec![0.2, 0.4, 0.8]).unwrap();
        let z = execute(q.graph(), Coalition::from_atoms([0]), &s, &g, &cfg(10)).unwrap();
        assert_eq!(z.scores(), &[0.2 * EPS, 0.4 * EPS, 0.8 * EPS]);
        assert!(execute(q.graph(), Coalition::from_bits(0b100), &s, &g, &cfg(10)).is_err());
    }

    #[test]
    fn rank_counting_matches_scan() {
        let g = TripleGraph::from_triples(Split::Valid, 4, 1, []);
        let q = parse_query("?V: r:0(e:0, V) AND r:0(e:1, V)", &vocab(4, 1)).unwrap();
        let mut s = PrecomputedScorer::new(4, 1.0);
        s.insert(EntityId(0), RelationId(0), vec![0.9, 0.95, 0.9, 0.1]).unwrap();
        let z = execute(q.graph(), Coalition::full(2), &s, &g, &cfg(10)).unwrap();
        assert_eq!(z.count_above(0.9), 1);
        assert_eq!(z.count_above(0.95), 0);
        assert_eq!(z.count_above(0.0), 4);
    }
}
