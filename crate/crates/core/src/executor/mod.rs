//! Beam-search execution of partial queries and filtered ranking.
//!
//! A [`Coalition`] marks the atoms answered by the link predictor; all other
//! atoms are graph lookups on the observed graph. Scores combine with the
//! product t-norm (`a·b`) and t-conorm (`a + b - a·b`). Every intermediate
//! variable keeps its `k` best entities; the answer variable is scored over
//! the whole entity set.

mod answers;
mod beam;
mod rank;

pub use answers::{classify_answers, symbolic_answers, HardnessAudit};
pub use beam::{argmax_path, execute, PathAtom, PathStep, RankedAnswers};
pub use rank::{filtered_candidates, rank_of, Candidates};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::EntityId;
use crate::query::AtomId;
use crate::scorer::{ScoreError, DEFAULT_EPSILON};

/// Default beam width.
pub const DEFAULT_K: usize = 10;

/// Set of atoms executed neurally, as a bitmask over atom ids.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coalition(u32);

impl Coalition {
    pub const MAX_ATOMS: usize = 16;
    pub const EMPTY: Coalition = Coalition(0);

    pub fn from_bits(bits: u32) -> Self {
        Coalition(bits)
    }

    pub fn full(num_atoms: usize) -> Self {
        assert!(num_atoms <= Self::MAX_ATOMS, "at most {} atoms", Self::MAX_ATOMS);
        Coalition(((1u64 << num_atoms) - 1) as u32)
    }

    pub fn from_atoms<I: IntoIterator<Item = AtomId>>(atoms: I) -> Self {
        atoms.into_iter().fold(Coalition::EMPTY, Coalition::with)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, atom: AtomId) -> bool {
        atom < 32 && self.0 & (1 << atom) != 0
    }

    pub fn with(self, atom: AtomId) -> Self {
        assert!(atom < Self::MAX_ATOMS);
        Coalition(self.0 | (1 << atom))
    }

    pub fn without(self, atom: AtomId) -> Self {
        Coalition(self.0 & !(1u32.checked_shl(atom as u32).unwrap_or(0)))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn atoms(self) -> impl Iterator<Item = AtomId> {
        (0..32).filter(move |&a| self.0 & (1 << a) != 0)
    }

    /// Every coalition over `num_atoms` atoms, in bitmask order.
    pub fn all(num_atoms: usize) -> impl Iterator<Item = Coalition> {
        assert!(num_atoms <= Self::MAX_ATOMS);
        (0..1u32 << num_atoms).map(Coalition)
    }

    /// `0b…` with one digit per atom, atom 0 rightmost.
    pub fn label(self, num_atoms: usize) -> String {
        format!("0b{:0width$b}", self.0, width = num_atoms.max(1))
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, a) in self.atoms().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecConfig {
    /// Beam width for intermediate variables.
    pub k: usize,
    /// Score of entities a symbolic lookup does not reach.
    pub epsilon: f64,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl ExecConfig {
    pub fn validate(&self) -> Result<(), ExecError> {
        if self.k == 0 {
            return Err(ExecError::InvalidConfig("beam width k must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(ExecError::InvalidConfig(format!(
                "epsilon {} is outside (0, 1)",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("coalition {coalition:#b} names atoms outside a {num_atoms}-atom query")]
    CoalitionOutOfRange { coalition: u32, num_atoms: usize },
    #[error("scorer covers {scorer} entities but the observed graph has {graph}")]
    EntityCountMismatch { scorer: usize, graph: usize },
    #[error("target {0} is not among the filtered candidates")]
    TargetFiltered(EntityId),
    #[error("entity {0} is out of range")]
    UnknownEntity(EntityId),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coalition_bits() {
        let c = Coalition::from_atoms([0, 2]);
        assert_eq!(c.bits(), 0b101);
        assert!(c.contains(2) && !c.contains(1));
        assert_eq!(c.without(0), Coalition::from_bits(0b100));
        assert_eq!(c.label(3), "0b101");
        assert_eq!(Coalition::EMPTY.label(2), "0b00");
        assert_eq!(Coalition::full(3).len(), 3);
        assert_eq!(Coalition::all(2).count(), 4);
        assert_eq!(c.to_string(), "{0,2}");
    }

    #[test]
    fn config_bounds() {
        assert!(ExecConfig::default().validate().is_ok());
        assert!(ExecConfig {
            k: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(ExecConfig {
            epsilon: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
