use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Dictionary, EntityId, KgError, RelationId, Split};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: EntityId,
    pub predicate: RelationId,
    pub object: EntityId,
}

impl Triple {
    pub fn new(subject: u32, predicate: u32, object: u32) -> Self {
        Self {
            subject: EntityId(subject),
            predicate: RelationId(predicate),
            object: EntityId(object),
        }
    }
}

/// Immutable set of triples indexed by `(subject, predicate)`.
///
/// Object lists are sorted by entity index and free of duplicates.
#[derive(Clone, Debug)]
pub struct TripleGraph {
    split: Split,
    num_entities: usize,
    num_relations: usize,
    out_index: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    len: usize,
    duplicate_rows: usize,
}

impl TripleGraph {
    pub fn from_triples<I>(split: Split, num_entities: usize, num_relations: usize, triples: I) -> Self
    where
        I: IntoIterator<Item = Triple>,
    {
        let mut out_index: HashMap<(EntityId, RelationId), Vec<EntityId>> = HashMap::new();
        let mut rows = 0usize;
        for t in triples {
            debug_assert!(t.subject.index() < num_entities && t.object.index() < num_entities);
            debug_assert!(t.predicate.index() < num_relations);
            out_index.entry((t.subject, t.predicate)).or_default().push(t.object);
            rows += 1;
        }
        let mut len = 0;
        for objects in out_index.values_mut() {
            objects.sort_unstable();
            objects.dedup();
            len += objects.len();
        }
        Self {
            split,
            num_entities,
            num_relations,
            out_index,
            len,
            duplicate_rows: rows - len,
        }
    }

    /// Loads `subject<TAB>predicate<TAB>object` rows, resolving labels
    /// through the dictionaries.
    pub fn load(path: &Path, split: Split, entities: &Dictionary, relations: &Dictionary) -> Result<Self, KgError> {
        let text = fs::read_to_string(path).map_err(|e| KgError::io(path, e))?;
        let mut triples = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(KgError::MalformedRow {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    reason: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            let missing = |label: &str| KgError::MissingDictionaryEntry {
                label: label.to_string(),
                path: path.to_path_buf(),
                line: lineno + 1,
            };
            let s = entities.index_of(fields[0]).ok_or_else(|| missing(fields[0]))?;
            let p = relations.index_of(fields[1]).ok_or_else(|| missing(fields[1]))?;
            let o = entities.index_of(fields[2]).ok_or_else(|| missing(fields[2]))?;
            triples.push(Triple::new(s, p, o));
        }
        let graph = Self::from_triples(split, entities.len(), relations.len(), triples);
        if graph.duplicate_rows > 0 {
            log::warn!("{}: dropped {} duplicate rows", path.display(), graph.duplicate_rows);
        }
        Ok(graph)
    }

    /// Writes the graph as label TSV in `(subject, predicate, object)` order.
    pub fn write(&self, path: &Path, entities: &Dictionary, relations: &Dictionary) -> Result<(), KgError> {
        let mut out = Vec::with_capacity(self.len * 16);
        for t in self.triples() {
            writeln!(
                out,
                "{}\t{}\t{}",
                entities.label(t.subject.0).unwrap_or_default(),
                relations.label(t.predicate.0).unwrap_or_default(),
                entities.label(t.object.0).unwrap_or_default()
            )
            .expect("write to vec");
        }
        fs::write(path, out).map_err(|e| KgError::io(path, e))
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    /// Number of distinct triples.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Rows dropped as exact duplicates while building the graph.
    pub fn duplicate_rows(&self) -> usize {
        self.duplicate_rows
    }

    /// Objects `o` with `(s, p, o)` in the graph, ascending by index.
    #[inline]
    pub fn neighbors(&self, s: EntityId, p: RelationId) -> &[EntityId] {
        self.out_index.get(&(s, p)).map(Vec::as_slice).unwrap_or(&[])
    }

    #[inline]
    pub fn contains(&self, s: EntityId, p: RelationId, o: EntityId) -> bool {
        self.neighbors(s, p).binary_search(&o).is_ok()
    }

    /// All triples in `(subject, predicate, object)` order.
    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        let mut keys: Vec<_> = self.out_index.keys().copied().collect();
        keys.sort_unstable();
        keys.into_iter().flat_map(move |(s, p)| {
            self.out_index[&(s, p)].iter().map(move |&o| Triple {
                subject: s,
                predicate: p,
                object: o,
            })
        })
    }

    /// Number of `(subject, predicate)` keys with at least one object.
    pub fn key_count(&self) -> usize {
        self.out_index.len()
    }

    /// Triples of `self` that are absent from `other`.
    pub fn count_missing_from(&self, other: &TripleGraph) -> usize {
        self.out_index
            .iter()
            .map(|(&(s, p), objs)| {
                let theirs = other.neighbors(s, p);
                objs.iter().filter(|o| theirs.binary_search(o).is_err()).count()
            })
            .sum()
    }

    /// Union of two graphs, labelled with `split`.
    pub fn union(&self, other: &TripleGraph, split: Split) -> TripleGraph {
        let n = self.num_entities.max(other.num_entities);
        let r = self.num_relations.max(other.num_relations);
        let mut g = TripleGraph::from_triples(split, n, r, self.triples().chain(other.triples()));
        g.duplicate_rows = 0;
        g
    }
}

impl PartialEq for TripleGraph {
    fn eq(&self, other: &Self) -> bool {
        self.split == other.split
            && self.num_entities == other.num_entities
            && self.num_relations == other.num_relations
            && self.len == other.len
            && self.out_index == other.out_index
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn toy() -> TripleGraph {
        // A=0, B=1, C=2; r1=0
        TripleGraph::from_triples(Split::Test, 3, 1, [Triple::new(0, 0, 2), Triple::new(0, 0, 1)])
    }

    #[test]
    fn neighbors_are_sorted_objects() {
        let g = toy();
        assert_eq!(g.neighbors(EntityId(0), RelationId(0)), &[EntityId(1), EntityId(2)]);
        assert!(g.neighbors(EntityId(1), RelationId(0)).is_empty());
    }

    #[test]
    fn contains_matches_set_membership() {
        let g = toy();
        assert!(g.contains(EntityId(0), RelationId(0), EntityId(1)));
        assert!(!g.contains(EntityId(0), RelationId(0), EntityId(0)));
    }

    #[test]
    fn duplicates_are_counted_once() {
        let g = TripleGraph::from_triples(Split::Train, 2, 1, [Triple::new(0, 0, 1), Triple::new(0, 0, 1)]);
        assert_eq!(g.len(), 1);
        assert_eq!(g.duplicate_rows(), 1);
    }

    #[test]
    fn load_resolves_labels_and_dedups() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tsv");
        fs::write(&path, "A\tr\tB\nA\tr\tB\n").unwrap();
        let e = Dictionary::from_labels(["A", "B"]).unwrap();
        let r = Dictionary::from_labels(["r"]).unwrap();
        let g = TripleGraph::load(&path, Split::Train, &e, &r).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.duplicate_rows(), 1);
    }

    #[test]
    fn load_empty_file_gives_empty_graph() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tsv");
        fs::write(&path, "").unwrap();
        let e = Dictionary::from_labels(["A"]).unwrap();
        let r = Dictionary::from_labels(["r"]).unwrap();
        let g = TripleGraph::load(&path, Split::Train, &e, &r).unwrap();
        assert!(g.is_empty());
        assert_eq!(g.triples().count(), 0);
    }

    #[test]
    fn load_reports_unknown_label_and_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let e = Dictionary::from_labels(["A", "B"]).unwrap();
        let r = Dictionary::from_labels(["r"]).unwrap();

        let path = dir.path().join("unknown.tsv");
        fs::write(&path, "A\tr\tB\nA\tr\tZ\n").unwrap();
        match TripleGraph::load(&path, Split::Train, &e, &r) {
            Err(KgError::MissingDictionaryEntry { label, line, .. }) => {
                assert_eq!(label, "Z");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }

        let path = dir.path().join("bad.tsv");
        fs::write(&path, "A\tr\n").unwrap();
        assert!(matches!(
            TripleGraph::load(&path, Split::Train, &e, &r),
            Err(KgError::MalformedRow { line: 1, .. })
        ));
    }

    #[test]
    fn index_covers_exactly_the_triples() {
        let triples: Vec<Triple> = (0..50u32).map(|i| Triple::new(i % 7, i % 3, (i * 13) % 11)).collect();
        let g = TripleGraph::from_triples(Split::Test, 11, 3, triples.clone());
        let expected: BTreeSet<Triple> = triples.into_iter().collect();
        let got: BTreeSet<Triple> = g.triples().collect();
        assert_eq!(got, expected);
        assert_eq!(g.len(), expected.len());
        for t in &expected {
            assert!(g.neighbors(t.subject, t.predicate).contains(&t.object));
            assert!(g.contains(t.subject, t.predicate, t.object));
        }
    }
}
