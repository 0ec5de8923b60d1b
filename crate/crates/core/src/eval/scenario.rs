use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{select_atom, EvalError, SelectionMethod};
use crate::executor::{Coalition, ExecConfig};
use crate::kg::{EntityId, TripleGraph};
use crate::query::{AtomId, QueryInstance, Shape};
use crate::scorer::{AtomScorer, CachedScorer};
use crate::shapley::QueryExplainer;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Start fully neural with the target at rank 1; demote the selected
    /// atom to symbolic execution.
    Necessary,
    /// Start fully symbolic with the target below rank 1; promote the
    /// selected atom to neural execution.
    Sufficient,
}

impl Scenario {
    pub const ALL: [Scenario; 2] = [Scenario::Necessary, Scenario::Sufficient];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Necessary => "necessary",
            Scenario::Sufficient => "sufficient",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| EvalError::UnknownScenario(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub exec: ExecConfig,
    /// Root seed for the randomized selection methods.
    pub seed: u64,
}

/// One (query, hard answer) pair under one method and scenario.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairOutcome {
    pub target: EntityId,
    pub method: SelectionMethod,
    pub scenario: Scenario,
    pub atom: AtomId,
    pub baseline_rank: usize,
    pub new_rank: usize,
}

impl PairOutcome {
    pub fn delta_mrr(&self) -> f64 {
        1.0 / self.new_rank as f64 - 1.0 / self.baseline_rank as f64
    }

    pub fn delta_hits1(&self) -> f64 {
        (self.new_rank == 1) as u8 as f64 - (self.baseline_rank == 1) as u8 as f64
    }
}

/// Every pair outcome of one query.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueryEvaluation {
    pub query: usize,
    pub shape: Shape,
    pub outcomes: Vec<PairOutcome>,
    /// Hard answers that failed each scenario's precondition, in
    /// [`Scenario::ALL`] order.
    pub skipped: [usize; 2],
}

/// Runs the requested methods and scenarios on every hard answer of `query`.
pub fn evaluate_query<S: AtomScorer + ?Sized>(
    index: usize,
    query: &QueryInstance,
    scorer: &S,
    observed: &TripleGraph,
    config: &EvalConfig,
    methods: &[SelectionMethod],
    scenarios: &[Scenario],
) -> Result<QueryEvaluation, EvalError> {
    // per-query cache: coalitions share most (subject, relation) lookups,
    // queries rarely do, and a global cache would grow without bound
    let cached = CachedScorer::new(scorer);
    let explainer = QueryExplainer::new(query, &cached, observed, config.exec)?;
    let n = query.graph().num_atoms();
    let full = Coalition::full(n);
    let mut outcomes = Vec::new();
    let mut skipped = [0usize; 2];
    for &target in query.answers().hard() {
        for &scenario in scenarios {
            let (baseline, qualifies) = match scenario {
                Scenario::Necessary => {
                    let r = explainer.rank(full, target)?;
                    (r, r == 1)
                }
                Scenario::Sufficient => {
                    let r = explainer.rank(Coalition::EMPTY, target)?;
                    (r, r > 1)
                }
            };
            if !qualifies {
                skipped[scenario as usize] += 1;
                continue;
            }
            for &method in methods {
                let atom = select_atom(method, &explainer, target, config.seed)?;
                let coalition = match scenario {
                    Scenario::Necessary => full.without(atom),
                    Scenario::Sufficient => Coalition::EMPTY.with(atom),
                };
                let outcome = PairOutcome {
                    target,
                    method,
                    scenario,
                    atom,
                    baseline_rank: baseline,
                    new_rank: explainer.rank(coalition, target)?,
                };
                if scenario == Scenario::Necessary {
                    debug_assert!(outcome.delta_mrr() <= 0.0);
                }
                outcomes.push(outcome);
            }
        }
    }
    Ok(QueryEvaluation {
        query: index,
        shape: query.shape(),
        outcomes,
        skipped,
    })
}

/// [`evaluate_query`] over a query set, in parallel. Output order follows
/// input order regardless of scheduling.
pub fn evaluate_queries<S: AtomScorer + ?Sized>(
    queries: &[QueryInstance],
    scorer: &S,
    observed: &TripleGraph,
    config: &EvalConfig,
    methods: &[SelectionMethod],
    scenarios: &[Scenario],
) -> Result<Vec<QueryEvaluation>, EvalError> {
    queries
        .par_iter()
        .enumerate()
        .map(|(i, q)| evaluate_query(i, q, scorer, observed, config, methods, scenarios))
        .collect()
}

/// Mean deltas of one query's qualifying pairs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueryDelta {
    pub query: usize,
    pub shape: Shape,
    pub pairs: usize,
    pub delta_mrr: f64,
    pub delta_hits1: f64,
}

/// Per-query results of one method in one scenario.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub method: SelectionMethod,
    pub queries: Vec<QueryDelta>,
    /// Pairs excluded by the scenario precondition.
    pub skipped_pairs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShapeSummary {
    /// Queries with at least one qualifying pair.
    pub n: usize,
    pub pairs: usize,
    pub delta_mrr: Option<f64>,
    pub delta_hits1: Option<f64>,
}

impl ScenarioResult {
    /// Collects one method's outcomes; pairs average into their query first.
    pub fn from_evaluations(evals: &[QueryEvaluation], scenario: Scenario, method: SelectionMethod) -> Self {
        let queries = evals
            .iter()
            .filter_map(|e| {
                let pairs: Vec<&PairOutcome> = e
                    .outcomes
                    .iter()
                    .filter(|o| o.scenario == scenario && o.method == method)
                    .collect();
                if pairs.is_empty() {
                    return None;
                }
                let k = pairs.len() as f64;
                Some(QueryDelta {
                    query: e.query,
                    shape: e.shape,
                    pairs: pairs.len(),
                    delta_mrr: pairs.iter().map(|o| o.delta_mrr()).sum::<f64>() / k,
                    delta_hits1: pairs.iter().map(|o| o.delta_hits1()).sum::<f64>() / k,
                })
            })
            .collect();
        Self {
            scenario,
            method,
            queries,
            skipped_pairs: evals.iter().map(|e| e.skipped[scenario as usize]).sum(),
        }
    }

    /// Query-level deltas averaged over the queries of one shape.
    pub fn shape_summary(&self, shape: Shape) -> ShapeSummary {
        let qs: Vec<&QueryDelta> = self.queries.iter().filter(|q| q.shape == shape).collect();
        let n = qs.len();
        let mean = |f: fn(&QueryDelta) -> f64| (n > 0).then(|| qs.iter().map(|q| f(q)).sum::<f64>() / n as f64);
        ShapeSummary {
            n,
            pairs: qs.iter().map(|q| q.pairs).sum(),
            delta_mrr: mean(|q| q.delta_mrr),
            delta_hits1: mean(|q| q.delta_hits1),
        }
    }
}

pub fn necessary_eval<S: AtomScorer + ?Sized>(
    queries: &[QueryInstance],
    scorer: &S,
    observed: &TripleGraph,
    method: SelectionMethod,
    config: &EvalConfig,
) -> Result<ScenarioResult, EvalError> {
    let evals = evaluate_queries(queries, scorer, observed, config, &[method], &[Scenario::Necessary])?;
    Ok(ScenarioResult::from_evaluations(&evals, Scenario::Necessary, method))
}

pub fn sufficient_eval<S: AtomScorer + ?Sized>(
    queries: &[QueryInstance],
    scorer: &S,
    observed: &TripleGraph,
    method: SelectionMethod,
    config: &EvalConfig,
) -> Result<ScenarioResult, EvalError> {
    let evals = evaluate_queries(queries, scorer, observed, config, &[method], &[Scenario::Sufficient])?;
    Ok(ScenarioResult::from_evaluations(&evals, Scenario::Sufficient, method))
}
