use serde::Serialize;

use super::{Scenario, ScenarioResult, SelectionMethod};
use crate::query::Shape;

/// One line of a results table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub dataset: String,
    pub shape: Shape,
    pub method: SelectionMethod,
    pub scenario: Scenario,
    pub n: usize,
    /// Absent when no query of this shape qualified.
    pub delta_mrr: Option<f64>,
    pub delta_hits1: Option<f64>,
    pub seed: u64,
}

/// Rows grouped by result (scenario, method) in input order, shapes in
/// reporting order. Requested shapes without qualifying queries still get a
/// row, with `n = 0` and no deltas.
pub fn aggregate(dataset: &str, seed: u64, results: &[ScenarioResult], shapes: &[Shape]) -> Vec<TableRow> {
    let mut rows = Vec::new();
    for r in results {
        for shape in Shape::ALL.into_iter().filter(|s| shapes.contains(s)) {
            let s = r.shape_summary(shape);
            rows.push(TableRow {
                dataset: dataset.to_string(),
                shape,
                method: r.method,
                scenario: r.scenario,
                n: s.n,
                delta_mrr: s.delta_mrr,
                delta_hits1: s.delta_hits1,
                seed,
            });
        }
    }
    rows
}
