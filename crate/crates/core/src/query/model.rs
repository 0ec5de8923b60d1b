use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::plan::{self, Combiner, ExecutionPlan};
use super::QueryError;
use crate::kg::{EntityId, RelationId};

/// Dense atom index, assigned in textual order.
pub type AtomId = usize;
/// Index into [`QueryGraph::vars`].
pub type VarId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Anchor(EntityId),
    Var(VarId),
}

impl Term {
    pub fn as_var(self) -> Option<VarId> {
        match self {
            Term::Var(v) => Some(v),
            Term::Anchor(_) => None,
        }
    }

    pub fn as_anchor(self) -> Option<EntityId> {
        match self {
            Term::Anchor(e) => Some(e),
            Term::Var(_) => None,
        }
    }
}

/// `predicate(subject, object)`; the object is always a variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub id: AtomId,
    pub subject: Term,
    pub predicate: RelationId,
    pub object: Term,
}

impl Atom {
    pub fn object_var(&self) -> VarId {
        self.object.as_var().expect("validated: atom objects are variables")
    }
}

/// The eight query structures the engine admits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Shape {
    #[serde(rename = "2p")]
    P2,
    #[serde(rename = "2u")]
    U2,
    #[serde(rename = "2i")]
    I2,
    #[serde(rename = "3i")]
    I3,
    #[serde(rename = "3p")]
    P3,
    #[serde(rename = "2u1p")]
    U2P1,
    #[serde(rename = "2i1p")]
    I2P1,
    #[serde(rename = "1p2i")]
    P1I2,
}

impl Shape {
    /// Reporting order used by every results table.
    pub const ALL: [Shape; 8] = [
        Shape::P2,
        Shape::U2,
        Shape::I2,
        Shape::I3,
        Shape::P3,
        Shape::U2P1,
        Shape::I2P1,
        Shape::P1I2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Shape::P2 => "2p",
            Shape::U2 => "2u",
            Shape::I2 => "2i",
            Shape::I3 => "3i",
            Shape::P3 => "3p",
            Shape::U2P1 => "2u1p",
            Shape::I2P1 => "2i1p",
            Shape::P1I2 => "1p2i",
        }
    }

    pub fn num_atoms(self) -> usize {
        match self {
            Shape::P2 | Shape::U2 | Shape::I2 => 2,
            _ => 3,
        }
    }

    /// Shapes whose plan has a single level, so every atom is both a
    /// first-level and a last-level atom.
    pub fn is_single_level(self) -> bool {
        matches!(self, Shape::U2 | Shape::I2 | Shape::I3)
    }

    /// Recognises a plan by its per-step signature: number of anchored atoms,
    /// the steps feeding projections, and the combiner.
    pub(crate) fn infer(graph: &QueryGraph) -> Option<Shape> {
        use Combiner::{And, Or};
        let sig: Vec<(usize, Vec<usize>, Combiner)> = graph
            .plan()
            .steps
            .iter()
            .map(|step| {
                let mut anchored = 0;
                let mut sources = Vec::new();
                for &a in &step.atoms {
                    match graph.atoms[a].subject {
                        Term::Anchor(_) => anchored += 1,
                        Term::Var(v) => sources.push(graph.plan().step_of(v).expect("planned")),
                    }
                }
                sources.sort_unstable();
                (anchored, sources, step.combiner)
            })
            .collect();
        let shape = match sig.as_slice() {
            [(1, s0, And), (0, s1, And)] if s0.is_empty() && s1 == &[0] => Shape::P2,
            [(2, s0, Or)] if s0.is_empty() => Shape::U2,
            [(2, s0, And)] if s0.is_empty() => Shape::I2,
            [(3, s0, And)] if s0.is_empty() => Shape::I3,
            [(1, s0, And), (0, s1, And), (0, s2, And)] if s0.is_empty() && s1 == &[0] && s2 == &[1] => Shape::P3,
            [(2, s0, Or), (0, s1, And)] if s0.is_empty() && s1 == &[0] => Shape::U2P1,
            [(2, s0, And), (0, s1, And)] if s0.is_empty() && s1 == &[0] => Shape::I2P1,
            [(1, s0, And), (1, s1, And)] if s0.is_empty() && s1 == &[0] => Shape::P1I2,
            _ => return None,
        };
        Some(shape)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Shape {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Shape::ALL
            .into_iter()
            .find(|shape| shape.as_str() == s)
            .ok_or_else(|| QueryError::UnknownShape(format!("`{s}` is not a shape name")))
    }
}

/// Logical structure of an EPFO query and its execution plan.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryGraph {
    vars: Vec<String>,
    target: VarId,
    atoms: Vec<Atom>,
    dnf: Vec<Vec<AtomId>>,
    plan: ExecutionPlan,
}

impl QueryGraph {
    /// Validates and plans a query. Variables are renumbered by first
    /// appearance, DNF clauses are sorted.
    pub fn new(
        var_names: Vec<String>,
        target: VarId,
        atoms: Vec<(Term, RelationId, Term)>,
        dnf: Vec<Vec<AtomId>>,
    ) -> Result<Self, QueryError> {
        if atoms.is_empty() {
            return Err(QueryError::InvalidDnf("query has no atoms".into()));
        }
        if target >= var_names.len() {
            return Err(QueryError::UnboundVariable(format!("#{target}")));
        }
        let check_var = |t: Term, atom: usize| -> Result<(), QueryError> {
            match t {
                Term::Var(v) if v >= var_names.len() => Err(QueryError::InvalidAtom {
                    atom,
                    reason: format!("unknown variable index {v}"),
                }),
                _ => Ok(()),
            }
        };
        for (i, &(s, _, o)) in atoms.iter().enumerate() {
            check_var(s, i)?;
            check_var(o, i)?;
            if o.as_var().is_none() {
                return Err(QueryError::InvalidAtom {
                    atom: i,
                    reason: "object must be a variable".into(),
                });
            }
            if s == o {
                return Err(QueryError::InvalidAtom {
                    atom: i,
                    reason: "subject and object are the same variable".into(),
                });
            }
            if s == Term::Var(target) {
                return Err(QueryError::InvalidAtom {
                    atom: i,
                    reason: format!("answer variable `{}` cannot be a subject", var_names[target]),
                });
            }
        }

        // Renumber variables by first appearance.
        let mut remap: Vec<Option<VarId>> = vec![None; var_names.len()];
        let mut vars = Vec::new();
        for &(s, _, o) in &atoms {
            for v in [s, o].into_iter().filter_map(Term::as_var) {
                if remap[v].is_none() {
                    remap[v] = Some(vars.len());
                    vars.push(var_names[v].clone());
                }
            }
        }
        if let Some(unused) = remap.iter().position(Option::is_none) {
            return Err(QueryError::UnboundVariable(var_names[unused].clone()));
        }
        let rename = |t: Term| match t {
            Term::Var(v) => Term::Var(remap[v].expect("checked")),
            anchor => anchor,
        };
        let atoms: Vec<Atom> = atoms
            .into_iter()
            .enumerate()
            .map(|(id, (s, p, o))| Atom {
                id,
                subject: rename(s),
                predicate: p,
                object: rename(o),
            })
            .collect();
        let target = remap[target].expect("checked");

        let dnf = normalize_dnf(dnf, atoms.len())?;
        let plan = plan::build(&vars, target, &atoms, &dnf)?;
        Ok(Self {
            vars,
            target,
            atoms,
            dnf,
            plan,
        })
    }

    /// The unique variable that never appears as a subject, if there is one.
    pub fn infer_target(num_vars: usize, atoms: &[(Term, RelationId, Term)]) -> Option<VarId> {
        let mut is_subject = vec![false; num_vars];
        let mut used = vec![false; num_vars];
        for &(s, _, o) in atoms {
            if let Term::Var(v) = s {
                is_subject[v] = true;
                used[v] = true;
            }
            if let Term::Var(v) = o {
                used[v] = true;
            }
        }
        let mut sinks = (0..num_vars).filter(|&v| used[v] && !is_subject[v]);
        let first = sinks.next()?;
        sinks.next().is_none().then_some(first)
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn target(&self) -> VarId {
        self.target
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn dnf(&self) -> &[Vec<AtomId>] {
        &self.dnf
    }

    pub fn plan(&self) -> &ExecutionPlan {
        &self.plan
    }

    /// Atoms that contain an anchor entity.
    pub fn first_level_atoms(&self) -> Vec<AtomId> {
        self.atoms
            .iter()
            .filter(|a| matches!(a.subject, Term::Anchor(_)))
            .map(|a| a.id)
            .collect()
    }

    /// Atoms that contain the answer variable.
    pub fn last_level_atoms(&self) -> Vec<AtomId> {
        self.atoms
            .iter()
            .filter(|a| a.object == Term::Var(self.target))
            .map(|a| a.id)
            .collect()
    }

    /// Stable 64-bit digest of the structure, used to derive per-query seeds.
    pub fn fingerprint(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for a in &self.atoms {
            match a.subject {
                Term::Anchor(e) => eat(e.0 as u64),
                Term::Var(v) => eat((1 << 40) | v as u64),
            }
            eat(a.predicate.0 as u64);
            eat(a.object_var() as u64);
        }
        for clause in &self.dnf {
            eat(u64::MAX);
            clause.iter().for_each(|&a| eat(a as u64));
        }
        h
    }
}

fn normalize_dnf(mut dnf: Vec<Vec<AtomId>>, num_atoms: usize) -> Result<Vec<Vec<AtomId>>, QueryError> {
    if dnf.is_empty() {
        return Err(QueryError::InvalidDnf("no clauses".into()));
    }
    let mut covered = vec![false; num_atoms];
    for clause in &mut dnf {
        if clause.is_empty() {
            return Err(QueryError::InvalidDnf("empty clause".into()));
        }
        clause.sort_unstable();
        clause.dedup();
        for &a in clause.iter() {
            if a >= num_atoms {
                return Err(QueryError::InvalidDnf(format!("atom {a} does not exist")));
            }
            covered[a] = true;
        }
    }
    if let Some(a) = covered.iter().position(|c| !c) {
        return Err(QueryError::InvalidDnf(format!("atom {a} appears in no clause")));
    }
    dnf.sort();
    dnf.dedup();
    Ok(dnf)
}

/// Easy answers (reachable in the observed graph) and hard answers (only
/// reachable with missing links). Always disjoint.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AnswerSets {
    easy: BTreeSet<EntityId>,
    hard: BTreeSet<EntityId>,
}

impl AnswerSets {
    pub fn new(easy: BTreeSet<EntityId>, hard: BTreeSet<EntityId>) -> Result<Self, QueryError> {
        let overlap = easy.intersection(&hard).count();
        if overlap > 0 {
            return Err(QueryError::OverlappingAnswers(overlap));
        }
        Ok(Self { easy, hard })
    }

    pub fn easy(&self) -> &BTreeSet<EntityId> {
        &self.easy
    }

    pub fn hard(&self) -> &BTreeSet<EntityId> {
        &self.hard
    }
}

/// A query of one of the eight supported shapes with its answer sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryInstance {
    shape: Shape,
    graph: QueryGraph,
    answers: AnswerSets,
}

impl QueryInstance {
    pub fn new(graph: QueryGraph, answers: AnswerSets) -> Result<Self, QueryError> {
        let shape = Shape::infer(&graph).ok_or_else(|| {
            QueryError::UnknownShape(format!(
                "{} atoms over {} plan levels",
                graph.num_atoms(),
                graph.plan().steps.len()
            ))
        })?;
        Ok(Self { shape, graph, answers })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn graph(&self) -> &QueryGraph {
        &self.graph
    }

    pub fn answers(&self) -> &AnswerSets {
        &self.answers
    }

    pub fn with_answers(mut self, answers: AnswerSets) -> Self {
        self.answers = answers;
        self
    }
}
