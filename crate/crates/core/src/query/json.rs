//! JSON query files: an array of
//! `{"shape", "atoms": [{"s", "p", "o"}], "dnf", "easy", "hard"}` records.
//! Terms are written `e:<entity index>` or `v:<variable name>`.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Value};

use super::model::{AnswerSets, QueryGraph, QueryInstance, Shape, Term};
use super::QueryError;
use crate::kg::{EntityId, RelationId};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuery {
    shape: String,
    atoms: Vec<RawAtom>,
    dnf: Vec<Vec<usize>>,
    #[serde(default)]
    easy: Vec<u32>,
    #[serde(default)]
    hard: Vec<u32>,
    #[serde(default)]
    #[allow(dead_code)]
    id: Option<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAtom {
    s: String,
    p: u32,
    o: String,
}

fn schema(pointer: String, message: impl ToString) -> QueryError {
    QueryError::Schema {
        pointer,
        message: message.to_string(),
    }
}

/// Loads and validates every query in `path`. Entity and relation indices
/// are checked against the given counts.
pub fn load_query_file(
    path: &Path,
    num_entities: usize,
    num_relations: usize,
) -> Result<Vec<QueryInstance>, QueryError> {
    let text = std::fs::read_to_string(path).map_err(|e| QueryError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let root: Value = serde_json::from_str(&text).map_err(|e| schema(String::new(), e))?;
    let items = root
        .as_array()
        .ok_or_else(|| schema(String::new(), "expected a JSON array of queries"))?;
    items
        .iter()
        .enumerate()
        .map(|(i, item)| parse_one(item, &format!("/{i}"), num_entities, num_relations))
        .collect()
}

fn parse_one(item: &Value, ptr: &str, num_entities: usize, num_relations: usize) -> Result<QueryInstance, QueryError> {
    let raw: RawQuery = RawQuery::deserialize(item).map_err(|e| schema(ptr.to_string(), e))?;
    let declared: Shape = raw
        .shape
        .parse()
        .map_err(|e: QueryError| schema(format!("{ptr}/shape"), e))?;

    let mut var_names: Vec<String> = Vec::new();
    let mut term = |text: &str, at: String| -> Result<Term, QueryError> {
        if let Some(name) = text.strip_prefix("v:") {
            if name.is_empty() {
                return Err(schema(at, "empty variable name"));
            }
            let v = var_names.iter().position(|n| n == name).unwrap_or_else(|| {
                var_names.push(name.to_string());
                var_names.len() - 1
            });
            return Ok(Term::Var(v));
        }
        let idx: u32 = text
            .strip_prefix("e:")
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| schema(at.clone(), format!("`{text}` is neither `e:<index>` nor `v:<name>`")))?;
        if idx as usize >= num_entities {
            return Err(schema(at, format!("entity {idx} out of range")));
        }
        Ok(Term::Anchor(EntityId(idx)))
    };
    let mut atoms = Vec::with_capacity(raw.atoms.len());
    for (j, a) in raw.atoms.iter().enumerate() {
        let s = term(&a.s, format!("{ptr}/atoms/{j}/s"))?;
        let o = term(&a.o, format!("{ptr}/atoms/{j}/o"))?;
        if a.p as usize >= num_relations {
            return Err(schema(
                format!("{ptr}/atoms/{j}/p"),
                format!("relation {} out of range", a.p),
            ));
        }
        atoms.push((s, RelationId(a.p), o));
    }
    let target = QueryGraph::infer_target(var_names.len(), &atoms)
        .ok_or_else(|| schema(format!("{ptr}/atoms"), "no unique answer variable"))?;
    let graph = QueryGraph::new(var_names, target, atoms, raw.dnf).map_err(|e| {
        let field = if matches!(e, QueryError::InvalidDnf(_)) {
            "dnf"
        } else {
            "atoms"
        };
        schema(format!("{ptr}/{field}"), e)
    })?;

    let ids = |v: &[u32], field: &str| -> Result<BTreeSet<EntityId>, QueryError> {
        v.iter()
            .enumerate()
            .map(|(k, &e)| {
                if (e as usize) < num_entities {
                    Ok(EntityId(e))
                } else {
                    Err(schema(format!("{ptr}/{field}/{k}"), format!("entity {e} out of range")))
                }
            })
            .collect()
    };
    let answers = AnswerSets::new(ids(&raw.easy, "easy")?, ids(&raw.hard, "hard")?)
        .map_err(|e| schema(format!("{ptr}/hard"), e))?;
    let q = QueryInstance::new(graph, answers).map_err(|e| schema(ptr.to_string(), e))?;
    if q.shape() != declared {
        return Err(schema(
            format!("{ptr}/shape"),
            QueryError::ShapeMismatch {
                declared: declared.to_string(),
                inferred: q.shape().to_string(),
            },
        ));
    }
    Ok(q)
}

pub fn query_to_json(q: &QueryInstance) -> Value {
    let g = q.graph();
    let term = |t: Term| match t {
        Term::Anchor(e) => format!("e:{}", e.0),
        Term::Var(v) => format!("v:{}", g.vars()[v]),
    };
    json!({
        "shape": q.shape().as_str(),
        "atoms": g.atoms().iter().map(|a| json!({
            "s": term(a.subject),
            "p": a.predicate.0,
            "o": term(a.object),
        })).collect::<Vec<_>>(),
        "dnf": g.dnf(),
        "easy": q.answers().easy().iter().map(|e| e.0).collect::<Vec<_>>(),
        "hard": q.answers().hard().iter().map(|e| e.0).collect::<Vec<_>>(),
    })
}

pub fn write_query_file(path: &Path, queries: &[QueryInstance]) -> Result<(), QueryError> {
    let doc = Value::Array(queries.iter().map(query_to_json).collect());
    let text = serde_json::to_string(&doc).expect("json values serialize");
    std::fs::write(path, text).map_err(|e| QueryError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<Vec<QueryInstance>, QueryError> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.json");
        std::fs::write(&path, text).unwrap();
        load_query_file(&path, 100, 10)
    }

    #[test]
    fn loads_a_two_hop_query() {
        let qs = load(
            r#"[{"shape":"2p","atoms":[{"s":"e:4","p":1,"o":"v:V1"},{"s":"v:V1","p":2,"o":"v:V2"}],
                "dnf":[[0,1]],"easy":[7],"hard":[8,9]}]"#,
        )
        .unwrap();
        assert_eq!(qs.len(), 1);
        assert_eq!(qs[0].shape(), Shape::P2);
        assert_eq!(qs[0].answers().hard().len(), 2);
    }

    #[test]
    fn overlapping_answers_point_at_hard() {
        let err = load(
            r#"[{"shape":"2i","atoms":[{"s":"e:1","p":1,"o":"v:V"},{"s":"e:2","p":2,"o":"v:V"}],
                "dnf":[[0,1]],"easy":[7],"hard":[7]}]"#,
        )
        .unwrap_err();
        assert!(
            matches!(err, QueryError::Schema { ref pointer, .. } if pointer == "/0/hard"),
            "{err}"
        );
    }

    #[test]
    fn bad_term_points_at_the_field() {
        let err =
            load(r#"[{"shape":"2i","atoms":[{"s":"e:1","p":1,"o":"v:V"},{"s":"x:2","p":2,"o":"v:V"}],"dnf":[[0,1]]}]"#)
                .unwrap_err();
        assert!(
            matches!(err, QueryError::Schema { ref pointer, .. } if pointer == "/0/atoms/1/s"),
            "{err}"
        );
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let err =
            load(r#"[{"shape":"2u","atoms":[{"s":"e:1","p":1,"o":"v:V"},{"s":"e:2","p":2,"o":"v:V"}],"dnf":[[0,1]]}]"#)
                .unwrap_err();
        assert!(
            matches!(err, QueryError::Schema { ref pointer, .. } if pointer == "/0/shape"),
            "{err}"
        );
    }

    #[test]
    fn missing_field_is_a_schema_error() {
        let err = load(r#"[{"shape":"2p","dnf":[[0,1]]}]"#).unwrap_err();
        assert!(
            matches!(err, QueryError::Schema { ref pointer, .. } if pointer == "/0"),
            "{err}"
        );
    }

    #[test]
    fn write_then_load() {
        let qs = load(
            r#"[{"shape":"2u1p","atoms":[{"s":"e:1","p":1,"o":"v:V1"},{"s":"e:2","p":2,"o":"v:V1"},
                {"s":"v:V1","p":3,"o":"v:V2"}],"dnf":[[0,2],[1,2]],"easy":[],"hard":[5]}]"#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_query_file(&path, &qs).unwrap();
        assert_eq!(load_query_file(&path, 100, 10).unwrap(), qs);
    }
}
