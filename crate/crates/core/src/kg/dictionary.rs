use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::KgError;

/// Bijective `index <-> label` mapping read from an `index<TAB>label` file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dictionary {
    labels: Vec<String>,
    by_label: HashMap<String, u32>,
}

impl Dictionary {
    pub fn from_labels<I, S>(labels: I) -> Result<Self, KgError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let mut by_label = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if by_label.insert(label.clone(), i as u32).is_some() {
                return Err(KgError::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { labels, by_label })
    }

    /// Reads a dictionary file. Indices must cover `0..n` exactly, in any
    /// line order.
    pub fn load(path: &Path) -> Result<Self, KgError> {
        let text = fs::read_to_string(path).map_err(|e| KgError::io(path, e))?;
        let mut slots: Vec<Option<String>> = Vec::new();
        let mut seen = 0usize;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let malformed = |reason: &str| KgError::MalformedDictionary {
                path: path.to_path_buf(),
                line: lineno + 1,
                reason: reason.to_string(),
            };
            let (idx, label) = line
                .split_once('\t')
                .ok_or_else(|| malformed("expected `index<TAB>label`"))?;
            let idx: usize = idx
                .trim()
                .parse()
                .map_err(|_| malformed("index is not a non-negative integer"))?;
            if label.is_empty() {
                return Err(malformed("empty label"));
            }
            if idx >= slots.len() {
                slots.resize(idx + 1, None);
            }
            if slots[idx].is_some() {
                return Err(malformed("index assigned twice"));
            }
            slots[idx] = Some(label.to_string());
            seen += 1;
        }
        if seen != slots.len() {
            let gap = slots.iter().position(Option::is_none).unwrap_or(0);
            return Err(KgError::MalformedDictionary {
                path: path.to_path_buf(),
                line: 0,
                reason: format!("indices are not dense: {gap} is missing"),
            });
        }
        Self::from_labels(slots.into_iter().map(|s| s.unwrap_or_default()))
    }

    pub fn write(&self, path: &Path) -> Result<(), KgError> {
        let mut out = Vec::new();
        for (i, label) in self.labels.iter().enumerate() {
            writeln!(out, "{i}\t{label}").expect("write to vec");
        }
        fs::write(path, out).map_err(|e| KgError::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, index: u32) -> Option<&str> {
        self.labels.get(index as usize).map(String::as_str)
    }

    pub fn index_of(&self, label: &str) -> Option<u32> {
        self.by_label.get(label).copied()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_of_order_lines_are_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.dict");
        fs::write(&path, "1\tB\n0\tA\n2\tC\n").unwrap();
        let d = Dictionary::load(&path).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.label(0), Some("A"));
        assert_eq!(d.index_of("C"), Some(2));
    }

    #[test]
    fn sparse_indices_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.dict");
        fs::write(&path, "0\tA\n2\tC\n").unwrap();
        assert!(matches!(
            Dictionary::load(&path),
            Err(KgError::MalformedDictionary { .. })
        ));
    }

    #[test]
    fn duplicate_labels_are_rejected() {
        assert!(matches!(
            Dictionary::from_labels(["A", "B", "A"]),
            Err(KgError::DuplicateLabel(l)) if l == "A"
        ));
    }

    #[test]
    fn write_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.dict");
        let d = Dictionary::from_labels(["/music/genre/artists", "p q", "x"]).unwrap();
        d.write(&path).unwrap();
        assert_eq!(Dictionary::load(&path).unwrap(), d);
    }
}
