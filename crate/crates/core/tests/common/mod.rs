//! Independent reference implementations used by the integration tests.
//! Everything here enumerates; nothing reuses the beam or the planner.

#![allow(dead_code)]

use std::collections::BTreeSet;

use atomshap::executor::Coalition;
use atomshap::kg::{EntityId, RelationId, Split, Triple, TripleGraph};
use atomshap::query::{AnswerSets, QueryGraph, QueryInstance, Shape, Term};
use atomshap::scorer::AtomScorer;
use atomshap::synth::{anchor_count, shape_graph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdős–Rényi style graph: every (s, p, o) with s != o present with
/// probability `density`.
pub fn random_graph(rng: &mut ChaCha8Rng, split: Split, n: usize, r: usize, density: f64) -> TripleGraph {
    let mut triples = Vec::new();
    for s in 0..n as u32 {
        for p in 0..r as u32 {
            for o in 0..n as u32 {
                if s != o && rng.random_bool(density) {
                    triples.push(Triple::new(s, p, o));
                }
            }
        }
    }
    TripleGraph::from_triples(split, n, r, triples)
}

/// Keeps each triple of `full` with probability `keep`.
pub fn subgraph(rng: &mut ChaCha8Rng, full: &TripleGraph, split: Split, keep: f64) -> TripleGraph {
    let kept: Vec<Triple> = full.triples().filter(|_| rng.random_bool(keep)).collect();
    TripleGraph::from_triples(split, full.num_entities(), full.num_relations(), kept)
}

pub fn random_query(rng: &mut ChaCha8Rng, shape: Shape, n: usize, r: usize) -> QueryGraph {
    let anchors: Vec<EntityId> = (0..anchor_count(shape))
        .map(|_| EntityId(rng.random_range(0..n as u32)))
        .collect();
    let relations: Vec<RelationId> = (0..shape.num_atoms())
        .map(|_| RelationId(rng.random_range(0..r as u32)))
        .collect();
    shape_graph(shape, &anchors, &relations)
}

pub fn instance(graph: QueryGraph, easy: &[u32], hard: &[u32]) -> QueryInstance {
    let set = |v: &[u32]| v.iter().copied().map(EntityId).collect::<BTreeSet<_>>();
    QueryInstance::new(graph, AnswerSets::new(set(easy), set(hard)).unwrap()).unwrap()
}

/// Calls `f` with every assignment of entities to the query's variables.
fn for_each_binding(num_vars: usize, n: usize, mut f: impl FnMut(&[u32])) {
    let mut b = vec![0u32; num_vars];
    loop {
        f(&b);
        let mut i = 0;
        loop {
            if i == num_vars {
                return;
            }
            b[i] += 1;
            if (b[i] as usize) < n {
                break;
            }
            b[i] = 0;
            i += 1;
        }
    }
}

fn resolve(t: Term, binding: &[u32]) -> u32 {
    match t {
        Term::Anchor(e) => e.0,
        Term::Var(v) => binding[v],
    }
}

/// Crisp answers: targets of bindings that satisfy some DNF clause.
pub fn brute_force_answers(q: &QueryGraph, graph: &TripleGraph) -> BTreeSet<EntityId> {
    let mut out = BTreeSet::new();
    for_each_binding(q.vars().len(), graph.num_entities(), |b| {
        let holds = |a: usize| {
            let atom = &q.atoms()[a];
            graph.contains(
                EntityId(resolve(atom.subject, b)),
                atom.predicate,
                EntityId(resolve(atom.object, b)),
            )
        };
        if q.dnf().iter().any(|clause| clause.iter().all(|&a| holds(a))) {
            out.insert(EntityId(b[q.target()]));
        }
    });
    out
}

/// Fuzzy score of every entity as answer: max over bindings of the query
/// formula with atoms shared by every clause factored out of the
/// disjunction, `shared ∧ (clause_1 ∨ … ∨ clause_m)`. Conjunction is the
/// product, disjunction the probabilistic sum.
pub fn brute_force_scores<S: AtomScorer + ?Sized>(
    q: &QueryGraph,
    coalition: Coalition,
    scorer: &S,
    observed: &TripleGraph,
    epsilon: f64,
) -> Vec<f64> {
    let n = scorer.num_entities();
    // table[atom][subject][object]
    let table: Vec<Vec<Vec<f64>>> = q
        .atoms()
        .iter()
        .map(|atom| {
            (0..n as u32)
                .map(EntityId)
                .map(|s| {
                    if coalition.contains(atom.id) {
                        scorer.score_objects(s, atom.predicate).unwrap().to_vec()
                    } else {
                        (0..n as u32)
                            .map(|o| {
                                if observed.contains(s, atom.predicate, EntityId(o)) {
                                    1.0
                                } else {
                                    epsilon
                                }
                            })
                            .collect()
                    }
                })
                .collect()
        })
        .collect();
    let dnf = q.dnf();
    let shared: Vec<usize> = (0..q.num_atoms())
        .filter(|a| dnf.iter().all(|c| c.contains(a)))
        .collect();
    let mut best = vec![0.0f64; n];
    for_each_binding(q.vars().len(), n, |b| {
        let val = |a: usize| {
            let atom = &q.atoms()[a];
            table[a][resolve(atom.subject, b) as usize][resolve(atom.object, b) as usize]
        };
        let head: f64 = shared.iter().map(|&a| val(a)).product();
        let mut none = 1.0;
        for clause in dnf {
            let c: f64 = clause.iter().filter(|a| !shared.contains(a)).map(|&a| val(a)).product();
            none *= 1.0 - c;
        }
        let v = head * (1.0 - none);
        let t = b[q.target()] as usize;
        if v > best[t] {
            best[t] = v;
        }
    });
    best
}

/// Optimistic filtered rank by linear scan.
pub fn linear_rank(scores: &[f64], target: EntityId, easy: &BTreeSet<EntityId>, hard: &BTreeSet<EntityId>) -> usize {
    let z = scores[target.index()];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(e, _)| {
            let e = EntityId(e as u32);
            e == target || !(easy.contains(&e) || hard.contains(&e))
        })
        .filter(|&(_, &s)| s > z)
        .count()
}
