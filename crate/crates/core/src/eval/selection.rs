use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::executor::{argmax_path, Coalition, PathStep};
use crate::kg::EntityId;
use crate::query::{AtomId, Combiner};
use crate::scorer::AtomScorer;
use crate::shapley::QueryExplainer;

/// How the single atom to execute differently is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    /// A random atom among those with an anchor subject.
    FirstLevel,
    /// A random atom among those producing the answer variable.
    LastLevel,
    /// A random atom.
    Random,
    /// The weakest link on the best neural path; union branches compete
    /// through their strongest member.
    ScoreBased,
    /// The atom with the largest Shapley value.
    CqdShap,
}

impl SelectionMethod {
    pub const ALL: [SelectionMethod; 5] = [
        SelectionMethod::FirstLevel,
        SelectionMethod::LastLevel,
        SelectionMethod::Random,
        SelectionMethod::ScoreBased,
        SelectionMethod::CqdShap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMethod::FirstLevel => "first_level",
            SelectionMethod::LastLevel => "last_level",
            SelectionMethod::Random => "random",
            SelectionMethod::ScoreBased => "score_based",
            SelectionMethod::CqdShap => "cqd_shap",
        }
    }

    pub fn is_randomized(self) -> bool {
        matches!(
            self,
            SelectionMethod::FirstLevel | SelectionMethod::LastLevel | SelectionMethod::Random
        )
    }
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionMethod {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| EvalError::UnknownMethod(s.to_string()))
    }
}

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one `(query, target)` pair. Every randomized method draws from
/// the same stream, so methods with identical candidate lists agree.
pub fn pair_seed(run_seed: u64, query_fingerprint: u64, target: EntityId) -> u64 {
    mix(mix(run_seed, query_fingerprint), target.0 as u64)
}

/// Picks the atom with the weakest link prediction score on `path`.
/// Atoms joined by a union count once, with their strongest score.
pub fn weakest_atom(path: &[PathStep]) -> Option<AtomId> {
    let mut best: Option<(f64, AtomId)> = None;
    let mut offer = |score: f64, atom: AtomId| {
        if best.is_none_or(|(s, a)| score < s || (score == s && atom < a)) {
            best = Some((score, atom));
        }
    };
    for step in path {
        match step.combiner {
            Combiner::And => step.atoms.iter().for_each(|a| offer(a.score, a.atom)),
            Combiner::Or => {
                let strongest = step
                    .atoms
                    .iter()
                    .max_by(|x, y| x.score.total_cmp(&y.score).then(y.atom.cmp(&x.atom)))?;
                offer(strongest.score, strongest.atom);
            }
        }
    }
    best.map(|(_, a)| a)
}

/// Atom the method selects for explaining `target`.
pub fn select_atom<S: AtomScorer + ?Sized>(
    method: SelectionMethod,
    explainer: &QueryExplainer<'_, S>,
    target: EntityId,
    run_seed: u64,
) -> Result<AtomId, EvalError> {
    let graph = explainer.query().graph();
    let pool: Vec<AtomId> = match method {
        SelectionMethod::FirstLevel => graph.first_level_atoms(),
        SelectionMethod::LastLevel => graph.last_level_atoms(),
        SelectionMethod::Random => (0..graph.num_atoms()).collect(),
        SelectionMethod::ScoreBased => {
            let full = explainer.run(Coalition::full(graph.num_atoms()))?;
            let path = argmax_path(full, target)?;
            return Ok(weakest_atom(&path).expect("queries have atoms"));
        }
        SelectionMethod::CqdShap => return Ok(explainer.explain(target)?.top_atom()),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(pair_seed(run_seed, graph.fingerprint(), target));
    Ok(*pool.choose(&mut rng).expect("every level has an atom"))
}
