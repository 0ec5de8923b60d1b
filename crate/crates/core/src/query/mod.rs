//! EPFO queries in disjunctive normal form.
//!
//! A [`QueryGraph`] is the logical structure (atoms, variables, DNF) plus its
//! execution plan; a [`QueryInstance`] pins that structure to one of the
//! eight supported shapes and attaches the easy/hard answer sets.

mod dsl;
mod json;
mod model;
mod plan;

pub use dsl::{parse_query, render, render_atom, Vocab};
pub use json::{load_query_file, query_to_json, write_query_file};
pub use model::{AnswerSets, Atom, AtomId, QueryGraph, QueryInstance, Shape, Term, VarId};
pub use plan::{Combiner, ExecutionPlan, PlanStep};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("syntax error at offset {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("query structure does not match any supported shape: {0}")]
    UnknownShape(String),
    #[error("variable `{0}` is not bound by any atom")]
    UnboundVariable(String),
    #[error("variable dependencies form a cycle")]
    CyclicDependency,
    #[error("invalid atom {atom}: {reason}")]
    InvalidAtom { atom: usize, reason: String },
    #[error("invalid DNF: {0}")]
    InvalidDnf(String),
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("{0} entities are both easy and hard answers")]
    OverlappingAnswers(usize),
    #[error("declared shape {declared} but structure is {inferred}")]
    ShapeMismatch { declared: String, inferred: String },
    #[error("schema violation at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}
