use once_cell::sync::OnceCell;
use rayon::prelude::*;

use super::{efficiency_residual, shapley_values, CoalitionValueTable, ShapleyError, ShapleyReport};
use crate::executor::{execute, filtered_candidates, rank_of, Coalition, ExecConfig, ExecError, RankedAnswers};
use crate::kg::{EntityId, TripleGraph};
use crate::query::QueryInstance;
use crate::scorer::AtomScorer;

/// Explains any number of targets of one query.
///
/// Answer scores do not depend on the target, so each coalition is executed
/// at most once per explainer and only filtering and ranking are repeated.
pub struct QueryExplainer<'a, S: ?Sized> {
    query: &'a QueryInstance,
    scorer: &'a S,
    observed: &'a TripleGraph,
    config: ExecConfig,
    runs: Vec<OnceCell<RankedAnswers>>,
}

impl<'a, S: AtomScorer + ?Sized> QueryExplainer<'a, S> {
    pub fn new(
        query: &'a QueryInstance,
        scorer: &'a S,
        observed: &'a TripleGraph,
        config: ExecConfig,
    ) -> Result<Self, ShapleyError> {
        config.validate()?;
        let n = query.graph().num_atoms();
        if n > Coalition::MAX_ATOMS {
            return Err(ShapleyError::TooManyAtoms(n));
        }
        Ok(Self {
            query,
            scorer,
            observed,
            config,
            runs: (0..1usize << n).map(|_| OnceCell::new()).collect(),
        })
    }

    pub fn query(&self) -> &QueryInstance {
        self.query
    }

    pub fn num_atoms(&self) -> usize {
        self.query.graph().num_atoms()
    }

    /// Scores under `coalition`, executed on first use.
    pub fn run(&self, coalition: Coalition) -> Result<&RankedAnswers, ExecError> {
        let cell = self
            .runs
            .get(coalition.bits() as usize)
            .ok_or(ExecError::CoalitionOutOfRange {
                coalition: coalition.bits(),
                num_atoms: self.num_atoms(),
            })?;
        cell.get_or_try_init(|| execute(self.query.graph(), coalition, self.scorer, self.observed, &self.config))
    }

    /// Executes every coalition, in parallel.
    pub fn run_all(&self) -> Result<(), ExecError> {
        Coalition::all(self.num_atoms())
            .collect::<Vec<_>>()
            .into_par_iter()
            .try_for_each(|c| self.run(c).map(|_| ()))
    }

    /// Filtered rank of `target` under `coalition`.
    pub fn rank(&self, coalition: Coalition, target: EntityId) -> Result<usize, ExecError> {
        let answers = self.run(coalition)?;
        let candidates = filtered_candidates(answers.num_entities(), self.query.answers(), target);
        rank_of(answers, &candidates, target)
    }

    /// Filtered rank of `target` under every coalition, bitmask order.
    pub fn ranks(&self, target: EntityId) -> Result<Vec<usize>, ExecError> {
        self.run_all()?;
        Coalition::all(self.num_atoms()).map(|c| self.rank(c, target)).collect()
    }

    pub fn coalition_values(&self, target: EntityId) -> Result<CoalitionValueTable, ShapleyError> {
        CoalitionValueTable::from_ranks(self.num_atoms(), &self.ranks(target)?)
    }

    pub fn explain(&self, target: EntityId) -> Result<ShapleyReport, ShapleyError> {
        let ranks = self.ranks(target)?;
        let table = CoalitionValueTable::from_ranks(self.num_atoms(), &ranks)?;
        let phi = shapley_values(&table)?;
        let residual = efficiency_residual(&table, &phi).expect("complete table");
        Ok(ShapleyReport {
            target,
            num_atoms: self.num_atoms(),
            rank_symbolic: ranks[0],
            rank_neural: *ranks.last().expect("at least one coalition"),
            values: table.complete()?,
            ranks,
            phi,
            efficiency_residual: residual,
        })
    }
}

/// `rank(∅) - rank(S)` of `target` for every coalition of `query`'s atoms.
pub fn coalition_values<S: AtomScorer + ?Sized>(
    query: &QueryInstance,
    target: EntityId,
    scorer: &S,
    observed: &TripleGraph,
    config: &ExecConfig,
) -> Result<CoalitionValueTable, ShapleyError> {
    QueryExplainer::new(query, scorer, observed, *config)?.coalition_values(target)
}

pub fn explain<S: AtomScorer + ?Sized>(
    query: &QueryInstance,
    target: EntityId,
    scorer: &S,
    observed: &TripleGraph,
    config: &ExecConfig,
) -> Result<ShapleyReport, ShapleyError> {
    QueryExplainer::new(query, scorer, observed, *config)?.explain(target)
}
