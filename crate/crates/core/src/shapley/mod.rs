//! Exact Shapley attribution of rank changes to query atoms.
//!
//! The players are the atoms of one query. A coalition `S` is executed with
//! the atoms in `S` answered neurally and the rest symbolically; its value
//! is how many places the target climbs relative to the all-symbolic run,
//! `rank(∅) - rank(S)`. All values are integers and every Shapley weight is
//! a ratio of factorials, so attributions are exact rationals.

mod explain;
mod report;

pub use explain::{coalition_values, explain, QueryExplainer};
pub use report::{format_decimal, ShapleyReport};

use num_rational::Ratio;
use num_traits::Zero;
use thiserror::Error;

use crate::executor::{Coalition, ExecError};

pub type Exact = Ratio<i64>;

/// Largest player count the permutation oracle accepts.
pub const ORACLE_MAX_ATOMS: usize = 6;

#[derive(Debug, Error)]
pub enum ShapleyError {
    #[error("coalition table is missing {missing} of {total} entries")]
    IncompleteTable { missing: usize, total: usize },
    #[error("the empty coalition must have value 0, found {0}")]
    NonZeroEmpty(i64),
    #[error("{0} atoms exceed the supported maximum")]
    TooManyAtoms(usize),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// `val(S)` for every coalition over `num_atoms` atoms, indexed by bitmask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoalitionValueTable {
    num_atoms: usize,
    values: Vec<Option<i64>>,
}

impl CoalitionValueTable {
    pub fn new(num_atoms: usize) -> Result<Self, ShapleyError> {
        if num_atoms > Coalition::MAX_ATOMS {
            return Err(ShapleyError::TooManyAtoms(num_atoms));
        }
        Ok(Self {
            num_atoms,
            values: vec![None; 1 << num_atoms],
        })
    }

    /// Complete table from values in bitmask order.
    pub fn from_values(num_atoms: usize, values: Vec<i64>) -> Result<Self, ShapleyError> {
        let mut t = Self::new(num_atoms)?;
        if values.len() != t.values.len() {
            return Err(ShapleyError::IncompleteTable {
                missing: t.values.len().saturating_sub(values.len()),
                total: t.values.len(),
            });
        }
        t.values = values.into_iter().map(Some).collect();
        t.check_empty()?;
        Ok(t)
    }

    /// Values `rank(∅) - rank(S)` from one rank per coalition, bitmask order.
    pub fn from_ranks(num_atoms: usize, ranks: &[usize]) -> Result<Self, ShapleyError> {
        let base = *ranks.first().ok_or(ShapleyError::IncompleteTable {
            missing: 1 << num_atoms,
            total: 1 << num_atoms,
        })? as i64;
        Self::from_values(num_atoms, ranks.iter().map(|&r| base - r as i64).collect())
    }

    pub fn insert(&mut self, coalition: Coalition, value: i64) {
        self.values[coalition.bits() as usize] = Some(value);
    }

    pub fn num_atoms(&self) -> usize {
        self.num_atoms
    }

    pub fn get(&self, coalition: Coalition) -> Option<i64> {
        self.values.get(coalition.bits() as usize).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check_empty(&self) -> Result<(), ShapleyError> {
        match self.values[0] {
            Some(0) | None => Ok(()),
            Some(v) => Err(ShapleyError::NonZeroEmpty(v)),
        }
    }

    /// All values in bitmask order, or the number of gaps.
    pub fn complete(&self) -> Result<Vec<i64>, ShapleyError> {
        self.check_empty()?;
        let missing = self.values.iter().filter(|v| v.is_none()).count();
        if missing > 0 {
            return Err(ShapleyError::IncompleteTable {
                missing,
                total: self.values.len(),
            });
        }
        Ok(self.values.iter().map(|v| v.expect("checked")).collect())
    }

    /// Value of the grand coalition.
    pub fn grand_value(&self) -> Option<i64> {
        self.get(Coalition::full(self.num_atoms))
    }
}

fn factorial(n: usize) -> i64 {
    (1..=n as i64).product()
}

/// Shapley value of every atom:
/// `φ_a = Σ_{S ⊆ A∖{a}} |S|!(n-|S|-1)!/n! · (v(S ∪ {a}) - v(S))`.
pub fn shapley_values(table: &CoalitionValueTable) -> Result<Vec<Exact>, ShapleyError> {
    let values = table.complete()?;
    let n = table.num_atoms;
    let n_fact = factorial(n);
    let weights: Vec<Exact> = (0..n)
        .map(|s| Exact::new(factorial(s) * factorial(n - s - 1), n_fact))
        .collect();
    Ok((0..n)
        .map(|a| {
            let bit = 1usize << a;
            (0..values.len())
                .filter(|s| s & bit == 0)
                .map(|s| weights[s.count_ones() as usize] * (values[s | bit] - values[s]))
                .fold(Exact::zero(), |acc, x| acc + x)
        })
        .collect())
}

/// Average marginal contribution over all `n!` join orders. Independent of
/// [`shapley_values`]; used to cross-check it.
pub fn permutation_oracle(table: &CoalitionValueTable) -> Result<Vec<Exact>, ShapleyError> {
    let values = table.complete()?;
    let n = table.num_atoms;
    if n > ORACLE_MAX_ATOMS {
        return Err(ShapleyError::TooManyAtoms(n));
    }
    let mut totals = vec![0i64; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut count = 0i64;
    permute(&mut order, 0, &mut |perm| {
        let mut joined = 0usize;
        for &a in perm {
            totals[a] += values[joined | (1 << a)] - values[joined];
            joined |= 1 << a;
        }
        count += 1;
    });
    Ok(totals.into_iter().map(|t| Exact::new(t, count.max(1))).collect())
}

fn permute(items: &mut [usize], start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, visit);
        items.swap(start, i);
    }
}

/// `Σφ - v(A)`; zero whenever the attribution is efficient.
pub fn efficiency_residual(table: &CoalitionValueTable, phi: &[Exact]) -> Option<Exact> {
    let grand = table.grand_value()?;
    Some(phi.iter().fold(Exact::zero(), |acc, &p| acc + p) - grand)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Exact {
        Exact::new(n, d)
    }

    #[test]
    fn two_player_closed_form() {
        // v(∅)=0, v(a0)=3, v(a1)=5, v(a0,a1)=4
        let t = CoalitionValueTable::from_values(2, vec![0, 3, 5, 4]).unwrap();
        let phi = shapley_values(&t).unwrap();
        assert_eq!(phi[0], r(1, 2) * 3 + r(1, 2) * (4 - 5));
        assert_eq!(phi[1], r(1, 2) * 5 + r(1, 2) * (4 - 3));
        assert_eq!(efficiency_residual(&t, &phi), Some(Exact::zero()));
    }

    #[test]
    fn single_player_gets_its_value() {
        let t = CoalitionValueTable::from_values(1, vec![0, -7]).unwrap();
        assert_eq!(shapley_values(&t).unwrap(), vec![r(-7, 1)]);
        assert_eq!(permutation_oracle(&t).unwrap(), vec![r(-7, 1)]);
    }

    #[test]
    fn symmetric_players_share_equally() {
        let t = CoalitionValueTable::from_values(2, vec![0, 4, 4, 10]).unwrap();
        let phi = shapley_values(&t).unwrap();
        assert_eq!(phi[0], phi[1]);
        assert_eq!(phi[0], r(5, 1));
    }

    #[test]
    fn three_player_weights() {
        let t = CoalitionValueTable::from_values(3, vec![0, 1, 2, 6, 3, 5, 7, 12]).unwrap();
        let phi = shapley_values(&t).unwrap();
        // φ0 = 1/3(1-0) + 1/6(6-2) + 1/6(5-3) + 1/3(12-7)
        assert_eq!(phi[0], r(1, 3) + r(4, 6) + r(2, 6) + r(5, 3));
        assert_eq!(phi, permutation_oracle(&t).unwrap());
    }

    #[test]
    fn incomplete_and_invalid_tables() {
        let mut t = CoalitionValueTable::new(2).unwrap();
        t.insert(Coalition::EMPTY, 0);
        t.insert(Coalition::from_bits(1), 2);
        assert!(matches!(
            shapley_values(&t),
            Err(ShapleyError::IncompleteTable { missing: 2, total: 4 })
        ));
        assert!(matches!(
            CoalitionValueTable::from_values(1, vec![1, 2]),
            Err(ShapleyError::NonZeroEmpty(1))
        ));
        assert!(CoalitionValueTable::from_values(2, vec![0, 1]).is_err());
    }

    #[test]
    fn ranks_become_rank_differences() {
        let t = CoalitionValueTable::from_ranks(2, &[56, 3, 90, 61]).unwrap();
        assert_eq!(t.complete().unwrap(), vec![0, 53, -34, -5]);
    }

    proptest! {
        #[test]
        fn matches_permutation_average(n in 1usize..=4, raw in prop::collection::vec(-500i64..500, 16)) {
            let mut values: Vec<i64> = raw[..1 << n].to_vec();
            values[0] = 0;
            let t = CoalitionValueTable::from_values(n, values).unwrap();
            let phi = shapley_values(&t).unwrap();
            prop_assert_eq!(&phi, &permutation_oracle(&t).unwrap());
            prop_assert_eq!(efficiency_residual(&t, &phi), Some(Exact::zero()));
        }

        #[test]
        fn null_players_get_zero(raw in prop::collection::vec(-50i64..50, 4)) {
            // atom 2 never changes the value
            let mut values = vec![0i64; 8];
            values[1..4].copy_from_slice(&raw[1..4]);
            for s in 0..4 {
                values[s | 4] = values[s];
            }
            let t = CoalitionValueTable::from_values(3, values).unwrap();
            prop_assert_eq!(shapley_values(&t).unwrap()[2], Exact::zero());
        }
    }
}
