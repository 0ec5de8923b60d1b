//! Necessary and sufficient evaluation of atom selection methods.
//!
//! Every hard answer that passes a scenario's precondition is re-ranked with
//! one selected atom switched to the other execution mode. Deltas are
//! averaged per answer, then per query, then per shape.

mod metrics;
mod scenario;
mod selection;
mod table;

pub use metrics::{hits_at_k, mrr};
pub use scenario::{
    evaluate_queries, evaluate_query, necessary_eval, sufficient_eval, EvalConfig, PairOutcome, QueryDelta,
    QueryEvaluation, Scenario, ScenarioResult, ShapeSummary,
};
pub use selection::{pair_seed, select_atom, weakest_atom, SelectionMethod};
pub use table::{aggregate, TableRow};

use thiserror::Error;

use crate::executor::ExecError;
use crate::shapley::ShapleyError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("rank list is empty")]
    EmptyRanks,
    #[error("ranks start at 1")]
    ZeroRank,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("unknown selection method `{0}`")]
    UnknownMethod(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Shapley(#[from] ShapleyError),
}
