//! Seeded synthetic knowledge graphs and query sets.
//!
//! Each relation only points into its own random range of objects, so
//! objects collect several incoming edges and intersection queries have
//! non-trivial answers. The observed splits hide a fixed fraction of the
//! full graph, which is what makes answers hard.

use std::collections::{BTreeSet, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::executor::symbolic_answers;
use crate::kg::{DatasetBundle, Dictionary, EntityId, RelationId, Split, Triple, TripleGraph};
use crate::query::{AnswerSets, QueryGraph, QueryInstance, Shape, Term};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    pub entities: usize,
    pub relations: usize,
    /// Distinct objects each relation can point to.
    pub range: usize,
    /// Mean out-degree of a subject under a relation it uses.
    pub mean_degree: f64,
    /// Probability that a subject uses a given relation at all.
    pub density: f64,
    /// Fraction of test edges absent from the validation graph.
    pub missing_rate: f64,
    /// Fraction of validation edges absent from the training graph.
    pub train_drop: f64,
    pub seed: u64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            entities: 300,
            relations: 12,
            range: 40,
            mean_degree: 1.5,
            density: 0.5,
            missing_rate: 0.3,
            train_drop: 0.1,
            seed: 0,
        }
    }
}

/// Generates the three nested splits. Labels are `e{i}` and `r{i}`.
pub fn generate_graph(config: &GraphConfig) -> DatasetBundle {
    assert!(config.entities >= 2 && config.relations >= 1, "graph too small");
    assert!(
        config.range >= 1 && config.range <= config.entities,
        "range out of bounds"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let all: Vec<u32> = (0..config.entities as u32).collect();
    let mut test = Vec::new();
    for p in 0..config.relations as u32 {
        let range: Vec<u32> = all.choose_multiple(&mut rng, config.range).copied().collect();
        for s in 0..config.entities as u32 {
            if !rng.random_bool(config.density) {
                continue;
            }
            // geometric out-degree, at least 1
            let mut degree = 1;
            while degree < config.range && rng.random::<f64>() > 1.0 / config.mean_degree {
                degree += 1;
            }
            for &o in range.choose_multiple(&mut rng, degree) {
                if o != s {
                    test.push(Triple::new(s, p, o));
                }
            }
        }
    }
    test.sort_unstable();
    test.dedup();
    let valid: Vec<Triple> = test
        .iter()
        .copied()
        .filter(|_| !rng.random_bool(config.missing_rate))
        .collect();
    let train: Vec<Triple> = valid
        .iter()
        .copied()
        .filter(|_| !rng.random_bool(config.train_drop))
        .collect();

    let graph =
        |split, triples: Vec<Triple>| TripleGraph::from_triples(split, config.entities, config.relations, triples);
    DatasetBundle::new(
        Dictionary::from_labels((0..config.entities).map(|i| format!("e{i}"))).expect("labels are unique"),
        Dictionary::from_labels((0..config.relations).map(|i| format!("r{i}"))).expect("labels are unique"),
        graph(Split::Train, train),
        graph(Split::Valid, valid),
        graph(Split::Test, test),
    )
    .expect("splits are nested by construction")
}

/// Builds the query graph of `shape`. Anchors are consumed in textual
/// order, one relation per atom.
type Template = (usize, usize, Vec<(Term, RelationId, Term)>, Vec<Vec<usize>>);

pub fn shape_graph(shape: Shape, anchors: &[EntityId], relations: &[RelationId]) -> QueryGraph {
    use Term::{Anchor, Var};
    let a = |i: usize| Anchor(anchors[i]);
    let r = |i: usize| relations[i];
    let (vars, target, atoms, dnf): Template = match shape {
        Shape::P2 => (
            2,
            1,
            vec![(a(0), r(0), Var(0)), (Var(0), r(1), Var(1))],
            vec![vec![0, 1]],
        ),
        Shape::U2 => (
            1,
            0,
            vec![(a(0), r(0), Var(0)), (a(1), r(1), Var(0))],
            vec![vec![0], vec![1]],
        ),
        Shape::I2 => (1, 0, vec![(a(0), r(0), Var(0)), (a(1), r(1), Var(0))], vec![vec![0, 1]]),
        Shape::I3 => (
            1,
            0,
            vec![(a(0), r(0), Var(0)), (a(1), r(1), Var(0)), (a(2), r(2), Var(0))],
            vec![vec![0, 1, 2]],
        ),
        Shape::P3 => (
            3,
            2,
            vec![(a(0), r(0), Var(0)), (Var(0), r(1), Var(1)), (Var(1), r(2), Var(2))],
            vec![vec![0, 1, 2]],
        ),
        Shape::U2P1 => (
            2,
            1,
            vec![(a(0), r(0), Var(0)), (a(1), r(1), Var(0)), (Var(0), r(2), Var(1))],
            vec![vec![0, 2], vec![1, 2]],
        ),
        Shape::I2P1 => (
            2,
            1,
            vec![(a(0), r(0), Var(0)), (a(1), r(1), Var(0)), (Var(0), r(2), Var(1))],
            vec![vec![0, 1, 2]],
        ),
        Shape::P1I2 => (
            2,
            1,
            vec![(a(0), r(0), Var(0)), (Var(0), r(1), Var(1)), (a(1), r(2), Var(1))],
            vec![vec![0, 1, 2]],
        ),
    };
    let names = (1..=vars).map(|i| format!("V{i}")).collect();
    QueryGraph::new(names, target, atoms, dnf).expect("shape templates are valid")
}

/// Number of anchors in a shape's template.
pub fn anchor_count(shape: Shape) -> usize {
    match shape {
        Shape::P2 | Shape::P3 => 1,
        Shape::I3 => 3,
        _ => 2,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryConfig {
    pub per_shape: usize,
    /// Queries whose full answer set exceeds this are discarded.
    pub max_answers: usize,
    /// Sampling attempts per requested query before giving up.
    pub attempts: usize,
    pub seed: u64,
}

impl Default for QueryConfig {
    fn default() -> Self {
        Self {
            per_shape: 100,
            max_answers: 50,
            attempts: 200,
            seed: 0,
        }
    }
}

/// Reverse adjacency of the full graph.
struct Incoming(Vec<Vec<(EntityId, RelationId)>>);

impl Incoming {
    fn new(graph: &TripleGraph) -> Self {
        let mut v = vec![Vec::new(); graph.num_entities()];
        for t in graph.triples() {
            v[t.object.index()].push((t.subject, t.predicate));
        }
        Self(v)
    }

    fn pick(&self, x: EntityId, rng: &mut ChaCha8Rng) -> Option<(EntityId, RelationId)> {
        self.0[x.index()].choose(rng).copied()
    }

    /// `n` distinct incoming edges of `x`.
    fn pick_distinct(&self, x: EntityId, n: usize, rng: &mut ChaCha8Rng) -> Option<Vec<(EntityId, RelationId)>> {
        let edges = &self.0[x.index()];
        if edges.len() < n {
            return None;
        }
        let picked: Vec<_> = edges.choose_multiple(rng, n).copied().collect();
        Some(picked)
    }
}

/// Grounds a shape backwards from `target` along edges of the full graph.
fn ground(shape: Shape, target: EntityId, inc: &Incoming, rng: &mut ChaCha8Rng) -> Option<QueryGraph> {
    let (anchors, relations) = match shape {
        Shape::P2 => {
            let (v1, r1) = inc.pick(target, rng)?;
            let (a, r0) = inc.pick(v1, rng)?;
            (vec![a], vec![r0, r1])
        }
        Shape::P3 => {
            let (v2, r2) = inc.pick(target, rng)?;
            let (v1, r1) = inc.pick(v2, rng)?;
            let (a, r0) = inc.pick(v1, rng)?;
            (vec![a], vec![r0, r1, r2])
        }
        Shape::U2 | Shape::I2 | Shape::I3 => {
            let e = inc.pick_distinct(target, shape.num_atoms(), rng)?;
            e.into_iter().unzip()
        }
        Shape::U2P1 | Shape::I2P1 => {
            let (v1, r2) = inc.pick(target, rng)?;
            let e = inc.pick_distinct(v1, 2, rng)?;
            (vec![e[0].0, e[1].0], vec![e[0].1, e[1].1, r2])
        }
        Shape::P1I2 => {
            let e = inc.pick_distinct(target, 2, rng)?;
            let (v1, r1) = e[0];
            let (b, r2) = e[1];
            let (a, r0) = inc.pick(v1, rng)?;
            (vec![a, b], vec![r0, r1, r2])
        }
    };
    Some(shape_graph(shape, &anchors, &relations))
}

/// Samples up to `config.per_shape` distinct queries of `shape` that have at
/// least one hard answer. Easy answers are those reachable in `observed`.
pub fn sample_queries(
    shape: Shape,
    full: &TripleGraph,
    observed: &TripleGraph,
    config: &QueryConfig,
) -> Vec<QueryInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (shape as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let inc = Incoming::new(full);
    let mut targets: Vec<EntityId> = (0..full.num_entities() as u32)
        .map(EntityId)
        .filter(|e| !inc.0[e.index()].is_empty())
        .collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for _ in 0..config.per_shape * config.attempts {
        if out.len() == config.per_shape || targets.is_empty() {
            break;
        }
        targets.shuffle(&mut rng);
        let Some(graph) = ground(shape, targets[0], &inc, &mut rng) else {
            continue;
        };
        let key: Vec<_> = graph
            .atoms()
            .iter()
            .map(|a| (a.subject.as_anchor(), a.predicate))
            .collect();
        if !seen.insert(key) {
            continue;
        }
        let all = symbolic_answers(&graph, full);
        if all.len() > config.max_answers {
            continue;
        }
        let easy = symbolic_answers(&graph, observed);
        let hard: BTreeSet<EntityId> = all.difference(&easy).copied().collect();
        if hard.is_empty() {
            continue;
        }
        let answers = AnswerSets::new(easy, hard).expect("disjoint by construction");
        out.push(QueryInstance::new(graph, answers).expect("templates infer their shape"));
    }
    out
}

/// [`sample_queries`] for several shapes, concatenated in the given order.
pub fn sample_query_set(
    shapes: &[Shape],
    full: &TripleGraph,
    observed: &TripleGraph,
    config: &QueryConfig,
) -> Vec<QueryInstance> {
    shapes
        .iter()
        .flat_map(|&s| sample_queries(s, full, observed, config))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_infer_their_shape() {
        let anchors = [EntityId(0), EntityId(1), EntityId(2)];
        let rels = [RelationId(0), RelationId(1), RelationId(2)];
        for shape in Shape::ALL {
            let g = shape_graph(shape, &anchors, &rels);
            assert_eq!(g.num_atoms(), shape.num_atoms());
            let q = QueryInstance::new(g, AnswerSets::default()).unwrap();
            assert_eq!(q.shape(), shape);
        }
    }

    #[test]
    fn splits_nest_and_hide_edges() {
        let b = generate_graph(&GraphConfig::default());
        assert!(b.train.count_missing_from(&b.valid) == 0 && b.valid.count_missing_from(&b.test) == 0);
        let hidden = b.test.len() - b.valid.len();
        let rate = hidden as f64 / b.test.len() as f64;
        assert!((0.25..0.35).contains(&rate), "hidden fraction {rate}");
    }

    #[test]
    fn generation_is_deterministic() {
        let c = GraphConfig::default();
        let (a, b) = (generate_graph(&c), generate_graph(&c));
        assert!(a.test.triples().eq(b.test.triples()));
        assert!(a.train.triples().eq(b.train.triples()));
    }

    #[test]
    fn sampled_queries_have_hard_answers() {
        let b = generate_graph(&GraphConfig::default());
        let cfg = QueryConfig {
            per_shape: 10,
            ..QueryConfig::default()
        };
        for shape in Shape::ALL {
            let qs = sample_queries(shape, &b.test, &b.valid, &cfg);
            assert_eq!(qs.len(), 10, "{shape:?}");
            for q in &qs {
                assert_eq!(q.shape(), shape);
                assert!(!q.answers().hard().is_empty());
                assert!(q.answers().hard().iter().all(|e| !q.answers().easy().contains(e)));
            }
        }
    }
}
