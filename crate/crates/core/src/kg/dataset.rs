use std::path::Path;

use serde::Serialize;

use super::{Dictionary, KgError, Split, TripleGraph};

pub const ENTITY_DICT_FILE: &str = "entities.dict";
pub const RELATION_DICT_FILE: &str = "relations.dict";

/// The three cumulative splits of one dataset: `train ⊆ valid ⊆ test`.
#[derive(Clone, Debug)]
pub struct DatasetBundle {
    pub entities: Dictionary,
    pub relations: Dictionary,
    pub train: TripleGraph,
    pub valid: TripleGraph,
    pub test: TripleGraph,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DatasetSummary {
    pub entities: usize,
    pub relations: usize,
    pub train_triples: usize,
    pub valid_triples: usize,
    pub test_triples: usize,
    pub duplicate_rows: usize,
}

impl DatasetBundle {
    /// Builds a bundle and checks split monotonicity.
    pub fn new(
        entities: Dictionary,
        relations: Dictionary,
        train: TripleGraph,
        valid: TripleGraph,
        test: TripleGraph,
    ) -> Result<Self, KgError> {
        for (lower, upper) in [(&train, &valid), (&valid, &test)] {
            let missing = lower.count_missing_from(upper);
            if missing > 0 {
                return Err(KgError::SplitNotMonotone {
                    lower: lower.split(),
                    upper: upper.split(),
                    missing,
                });
            }
        }
        Ok(Self {
            entities,
            relations,
            train,
            valid,
            test,
        })
    }

    /// Loads `entities.dict`, `relations.dict` and the three split files from
    /// `dir`. With `cumulative == false` each split file holds only the
    /// triples new to that split and the graphs are unioned on load.
    pub fn load(dir: &Path, cumulative: bool) -> Result<Self, KgError> {
        let entities = Dictionary::load(&dir.join(ENTITY_DICT_FILE))?;
        let relations = Dictionary::load(&dir.join(RELATION_DICT_FILE))?;
        let load = |split: Split| TripleGraph::load(&dir.join(split.file_name()), split, &entities, &relations);
        let train = load(Split::Train)?;
        let mut valid = load(Split::Valid)?;
        let mut test = load(Split::Test)?;
        if !cumulative {
            valid = valid.union(&train, Split::Valid);
            test = test.union(&valid, Split::Test);
        }
        Self::new(entities, relations, train, valid, test)
    }

    /// Writes the bundle in the cumulative on-disk layout read by [`load`](Self::load).
    pub fn write(&self, dir: &Path) -> Result<(), KgError> {
        std::fs::create_dir_all(dir).map_err(|e| KgError::io(dir, e))?;
        self.entities.write(&dir.join(ENTITY_DICT_FILE))?;
        self.relations.write(&dir.join(RELATION_DICT_FILE))?;
        for split in Split::ALL {
            self.graph(split)
                .write(&dir.join(split.file_name()), &self.entities, &self.relations)?;
        }
        Ok(())
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn graph(&self, split: Split) -> &TripleGraph {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            entities: self.entity_count(),
            relations: self.relation_count(),
            train_triples: self.train.len(),
            valid_triples: self.valid.len(),
            test_triples: self.test.len(),
            duplicate_rows: self.train.duplicate_rows() + self.valid.duplicate_rows() + self.test.duplicate_rows(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write_dataset(dir: &Path, train: &str, valid: &str, test: &str) {
        fs::write(dir.join(ENTITY_DICT_FILE), "0\tA\n1\tB\n2\tC\n").unwrap();
        fs::write(dir.join(RELATION_DICT_FILE), "0\tr\n").unwrap();
        fs::write(dir.join("train.tsv"), train).unwrap();
        fs::write(dir.join("valid.tsv"), valid).unwrap();
        fs::write(dir.join("test.tsv"), test).unwrap();
    }

    #[test]
    fn cumulative_splits_load() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(
            dir.path(),
            "A\tr\tB\n",
            "A\tr\tB\nB\tr\tC\n",
            "A\tr\tB\nB\tr\tC\nC\tr\tA\n",
        );
        let b = DatasetBundle::load(dir.path(), true).unwrap();
        assert_eq!(b.summary().train_triples, 1);
        assert_eq!(b.summary().valid_triples, 2);
        assert_eq!(b.summary().test_triples, 3);
    }

    #[test]
    fn non_monotone_cumulative_splits_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), "A\tr\tB\n", "B\tr\tC\n", "C\tr\tA\n");
        assert!(matches!(
            DatasetBundle::load(dir.path(), true),
            Err(KgError::SplitNotMonotone { .. })
        ));
    }

    #[test]
    fn incremental_splits_are_unioned() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), "A\tr\tB\n", "B\tr\tC\n", "C\tr\tA\n");
        let b = DatasetBundle::load(dir.path(), false).unwrap();
        assert_eq!(b.valid.len(), 2);
        assert_eq!(b.test.len(), 3);
    }

    #[test]
    fn write_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(
            dir.path(),
            "A\tr\tB\n",
            "A\tr\tB\nB\tr\tC\n",
            "A\tr\tB\nB\tr\tC\nC\tr\tA\n",
        );
        let b = DatasetBundle::load(dir.path(), true).unwrap();
        let out = tempfile::tempdir().unwrap();
        b.write(out.path()).unwrap();
        let again = DatasetBundle::load(out.path(), true).unwrap();
        assert_eq!(again.test, b.test);
        assert_eq!(again.valid, b.valid);
        assert_eq!(again.train, b.train);
    }

    #[test]
    fn missing_directory_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            DatasetBundle::load(&dir.path().join("nope"), true),
            Err(KgError::Io { .. })
        ));
    }
}
