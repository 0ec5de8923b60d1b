//! Neurosymbolic complex query answering over knowledge graphs, with exact
//! per-atom Shapley explanations of answer ranks.
//!
//! Each atom of a query is answered either symbolically (graph lookup on the
//! observed graph) or neurally (a link predictor). [`executor::execute`]
//! runs a query under any such split, [`shapley`] attributes the change in a
//! target's rank to the individual atoms, and [`eval`] measures how useful
//! those attributions are.

pub mod eval;
pub mod executor;
pub mod kg;
pub mod query;
pub mod scorer;
pub mod shapley;
pub mod synth;
