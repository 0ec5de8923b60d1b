//! ComplEx link predictor over a dense embedding table.
//!
//! The raw score of `(s, p, o)` is `Re(<e_s, w_p, conj(e_o)>)`. For a fixed
//! `(s, p)` this is a dot product between `s ∘ p` and every object row, so a
//! call costs one pass over the entity table.

use std::io::Read;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AtomScorer, Normalization, Provenance, ScoreError, ScoreVector};
use crate::kg::{EntityId, RelationId};

const BLOCKS: [&str; 4] = ["ent_re", "ent_im", "rel_re", "rel_im"];

#[derive(Serialize, Deserialize)]
struct Header {
    entities: usize,
    relations: usize,
    dim: usize,
    dtype: String,
    layout: Vec<String>,
}

/// Real and imaginary parts of entity and relation embeddings, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    num_entities: usize,
    num_relations: usize,
    dim: usize,
    ent_re: Vec<f32>,
    ent_im: Vec<f32>,
    rel_re: Vec<f32>,
    rel_im: Vec<f32>,
}

impl EmbeddingTable {
    pub fn new(
        num_entities: usize,
        num_relations: usize,
        dim: usize,
        ent_re: Vec<f32>,
        ent_im: Vec<f32>,
        rel_re: Vec<f32>,
        rel_im: Vec<f32>,
    ) -> Result<Self, ScoreError> {
        if dim == 0 {
            return Err(ScoreError::DimensionMismatch("embedding dimension is zero".into()));
        }
        for (name, block, rows) in [
            ("ent_re", &ent_re, num_entities),
            ("ent_im", &ent_im, num_entities),
            ("rel_re", &rel_re, num_relations),
            ("rel_im", &rel_im, num_relations),
        ] {
            if block.len() != rows * dim {
                return Err(ScoreError::DimensionMismatch(format!(
                    "{name} has {} values, expected {rows}x{dim}",
                    block.len()
                )));
            }
            if block.iter().any(|v| !v.is_finite()) {
                return Err(ScoreError::NonFinite(name));
            }
        }
        Ok(Self {
            num_entities,
            num_relations,
            dim,
            ent_re,
            ent_im,
            rel_re,
            rel_im,
        })
    }

    /// Gaussian random table, for synthetic benchmarks.
    pub fn random(num_entities: usize, num_relations: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0f32, 1.0 / (dim as f32).sqrt()).expect("valid std");
        let mut block = |rows: usize| -> Vec<f32> { (0..rows * dim).map(|_| normal.sample(&mut rng)).collect() };
        let ent_re = block(num_entities);
        let ent_im = block(num_entities);
        let rel_re = block(num_relations);
        let rel_im = block(num_relations);
        Self::new(num_entities, num_relations, dim, ent_re, ent_im, rel_re, rel_im).expect("consistent sizes")
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn row<'a>(&self, block: &'a [f32], i: usize) -> &'a [f32] {
        &block[i * self.dim..(i + 1) * self.dim]
    }

    fn check(&self, s: EntityId, p: RelationId) -> Result<(), ScoreError> {
        if s.index() >= self.num_entities {
            return Err(ScoreError::OutOfRange {
                kind: "entity",
                id: s.0,
                size: self.num_entities,
            });
        }
        if p.index() >= self.num_relations {
            return Err(ScoreError::OutOfRange {
                kind: "relation",
                id: p.0,
                size: self.num_relations,
            });
        }
        Ok(())
    }

    /// `s ∘ p` as separate real and imaginary parts.
    fn query_vector(&self, s: EntityId, p: RelationId) -> (Vec<f32>, Vec<f32>) {
        let (s_re, s_im) = (self.row(&self.ent_re, s.index()), self.row(&self.ent_im, s.index()));
        let (p_re, p_im) = (self.row(&self.rel_re, p.index()), self.row(&self.rel_im, p.index()));
        let q_re = (0..self.dim).map(|d| s_re[d] * p_re[d] - s_im[d] * p_im[d]).collect();
        let q_im = (0..self.dim).map(|d| s_re[d] * p_im[d] + s_im[d] * p_re[d]).collect();
        (q_re, q_im)
    }

    /// Unnormalised ComplEx score for every candidate object of `(s, p, ·)`.
    pub fn raw_scores(&self, s: EntityId, p: RelationId) -> Result<Vec<f32>, ScoreError> {
        Ok(self.raw_scores_batch(&[s], p)?.pop().expect("one subject"))
    }

    /// Raw scores for several subjects in one pass over the entity table.
    /// `Re(q * conj(o)) = q_re·o_re + q_im·o_im` with `q = s ∘ p`.
    pub fn raw_scores_batch(&self, subjects: &[EntityId], p: RelationId) -> Result<Vec<Vec<f32>>, ScoreError> {
        for &s in subjects {
            self.check(s, p)?;
        }
        let queries: Vec<(Vec<f32>, Vec<f32>)> = subjects.iter().map(|&s| self.query_vector(s, p)).collect();
        let (n, b, dim) = (self.num_entities, subjects.len(), self.dim);
        if b == 0 {
            return Ok(Vec::new());
        }
        const CHUNK: usize = 256;
        // entity-major scratch buffer: slot o * b + j
        let mut flat = vec![0f32; n * b];
        flat.par_chunks_mut(CHUNK * b).enumerate().for_each(|(chunk, slots)| {
            for (k, row) in slots.chunks_mut(b).enumerate() {
                let o = chunk * CHUNK + k;
                let re = &self.ent_re[o * dim..(o + 1) * dim];
                let im = &self.ent_im[o * dim..(o + 1) * dim];
                for (slot, (q_re, q_im)) in row.iter_mut().zip(&queries) {
                    *slot = dot2(q_re, re, q_im, im);
                }
            }
        });
        Ok((0..b).map(|j| (0..n).map(|o| flat[o * b + j]).collect()).collect())
    }

    pub fn read(path: &Path) -> Result<Self, ScoreError> {
        let fmt_err = |message: String| ScoreError::Format {
            path: path.display().to_string(),
            message,
        };
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|source| ScoreError::Io {
                path: path.display().to_string(),
                source,
            })?;
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| fmt_err("missing header line".into()))?;
        let header: Header =
            serde_json::from_slice(&bytes[..newline]).map_err(|e| fmt_err(format!("bad header: {e}")))?;
        if header.dtype != "f32le" {
            return Err(fmt_err(format!("unsupported dtype `{}`", header.dtype)));
        }
        let mut layout = header.layout.clone();
        layout.sort();
        let mut expected: Vec<String> = BLOCKS.iter().map(|s| s.to_string()).collect();
        expected.sort();
        if layout != expected {
            return Err(fmt_err(format!("layout must list {BLOCKS:?} once each")));
        }
        let payload = &bytes[newline + 1..];
        let (n, m, dim) = (header.entities, header.relations, header.dim);
        let want = 4 * dim * (2 * n + 2 * m);
        if payload.len() != want {
            return Err(fmt_err(format!("payload has {} bytes, expected {want}", payload.len())));
        }
        let mut offset = 0;
        let mut blocks: [Vec<f32>; 4] = Default::default();
        for name in &header.layout {
            let rows = if name.starts_with("ent") { n } else { m };
            let len = rows * dim * 4;
            let values = payload[offset..offset + len]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            offset += len;
            let slot = BLOCKS.iter().position(|b| b == name).expect("validated layout");
            blocks[slot] = values;
        }
        let [ent_re, ent_im, rel_re, rel_im] = blocks;
        Self::new(n, m, dim, ent_re, ent_im, rel_re, rel_im)
    }

    pub fn write(&self, path: &Path) -> Result<(), ScoreError> {
        let header = Header {
            entities: self.num_entities,
            relations: self.num_relations,
            dim: self.dim,
            dtype: "f32le".into(),
            layout: BLOCKS.iter().map(|s| s.to_string()).collect(),
        };
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        for block in [&self.ent_re, &self.ent_im, &self.rel_re, &self.rel_im] {
            out.reserve(block.len() * 4);
            for v in block.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        std::fs::write(path, out).map_err(|source| ScoreError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

#[inline]
fn dot2(a_re: &[f32], b_re: &[f32], a_im: &[f32], b_im: &[f32]) -> f32 {
    let mut acc = [0f32; 8];
    let chunks = a_re.len() / 8;
    for c in 0..chunks {
        let r = c * 8..c * 8 + 8;
        let (ar, br, ai, bi) = (&a_re[r.clone()], &b_re[r.clone()], &a_im[r.clone()], &b_im[r]);
        for l in 0..8 {
            acc[l] += ar[l] * br[l] + ai[l] * bi[l];
        }
    }
    let mut tail = 0f32;
    for d in chunks * 8..a_re.len() {
        tail += a_re[d] * b_re[d] + a_im[d] * b_im[d];
    }
    acc.iter().sum::<f32>() + tail
}

/// Normalised ComplEx scores for `(s, p, ·)`.
pub fn neural_scores(
    table: &EmbeddingTable,
    s: EntityId,
    p: RelationId,
    normalization: Normalization,
) -> Result<ScoreVector, ScoreError> {
    let raw = table.raw_scores(s, p)?;
    Ok(ScoreVector::new(normalization.apply(&raw), Provenance::Neural))
}

#[derive(Clone, Debug)]
pub struct ComplexScorer {
    table: EmbeddingTable,
    normalization: Normalization,
}

impl ComplexScorer {
    pub fn new(table: EmbeddingTable, normalization: Normalization) -> Self {
        Self { table, normalization }
    }

    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }
}

impl AtomScorer for ComplexScorer {
    fn num_entities(&self) -> usize {
        self.table.num_entities
    }

    fn score_objects(&self, subject: EntityId, predicate: RelationId) -> Result<ScoreVector, ScoreError> {
        neural_scores(&self.table, subject, predicate, self.normalization)
    }

    fn score_objects_batch(
        &self,
        subjects: &[EntityId],
        predicate: RelationId,
    ) -> Result<Vec<ScoreVector>, ScoreError> {
        Ok(self
            .table
            .raw_scores_batch(subjects, predicate)?
            .iter()
            .map(|raw| ScoreVector::new(self.normalization.apply(raw), Provenance::Neural))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Straight evaluation of the four-term real part, one candidate at a time.
    fn four_term(t: &EmbeddingTable, s: usize, p: usize, o: usize) -> f64 {
        let d = t.dim;
        (0..d)
            .map(|k| {
                let (sr, si) = (t.ent_re[s * d + k] as f64, t.ent_im[s * d + k] as f64);
                let (pr, pi) = (t.rel_re[p * d + k] as f64, t.rel_im[p * d + k] as f64);
                let (or, oi) = (t.ent_re[o * d + k] as f64, t.ent_im[o * d + k] as f64);
                sr * pr * or + si * pr * oi + sr * pi * oi - si * pi * or
            })
            .sum()
    }

    #[test]
    fn unit_embeddings_by_hand() {
        // e0 = (1, 0), e1 = (0, 1), p = (1, 0), dim 1
        let t = EmbeddingTable::new(2, 1, 1, vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0], vec![0.0]).unwrap();
        assert_eq!(t.raw_scores(EntityId(0), RelationId(0)).unwrap(), vec![1.0, 0.0]);
        let n = neural_scores(&t, EntityId(0), RelationId(0), Normalization::MinMax).unwrap();
        assert_eq!(n.values(), &[1.0, 0.0]);
    }

    #[test]
    fn zero_relation_gives_all_zero() {
        let t = EmbeddingTable::new(2, 1, 1, vec![1.0, 0.5], vec![0.2, 1.0], vec![0.0], vec![0.0]).unwrap();
        let n = neural_scores(&t, EntityId(0), RelationId(0), Normalization::MinMax).unwrap();
        assert_eq!(n.values(), &[0.0, 0.0]);
    }

    #[test]
    fn out_of_range_ids_are_errors() {
        let t = EmbeddingTable::random(3, 2, 4, 1);
        assert!(matches!(
            t.raw_scores(EntityId(3), RelationId(0)),
            Err(ScoreError::OutOfRange { .. })
        ));
        assert!(matches!(
            t.raw_scores(EntityId(0), RelationId(2)),
            Err(ScoreError::OutOfRange { .. })
        ));
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let err = EmbeddingTable::new(2, 1, 2, vec![0.0; 4], vec![0.0; 3], vec![0.0; 2], vec![0.0; 2]);
        assert!(matches!(err, Err(ScoreError::DimensionMismatch(_))));
        let err = EmbeddingTable::new(1, 1, 1, vec![f32::NAN], vec![0.0], vec![0.0], vec![0.0]);
        assert!(matches!(err, Err(ScoreError::NonFinite("ent_re"))));
    }

    #[test]
    fn file_round_trip_is_bitwise() {
        let t = EmbeddingTable::random(7, 3, 5, 9);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        t.write(&path).unwrap();
        assert_eq!(EmbeddingTable::read(&path).unwrap(), t);
    }

    #[test]
    fn reader_honours_layout_order_and_rejects_truncation() {
        let t = EmbeddingTable::random(2, 1, 3, 4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        let header =
            r#"{"entities":2,"relations":1,"dim":3,"dtype":"f32le","layout":["rel_im","rel_re","ent_im","ent_re"]}"#;
        let mut bytes = header.as_bytes().to_vec();
        bytes.push(b'\n');
        for block in [&t.rel_im, &t.rel_re, &t.ent_im, &t.ent_re] {
            for v in block.iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        std::fs::write(&path, &bytes).unwrap();
        assert_eq!(EmbeddingTable::read(&path).unwrap(), t);

        std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(EmbeddingTable::read(&path), Err(ScoreError::Format { .. })));
    }

    proptest! {
        #[test]
        fn vectorised_scores_match_four_term_sum(seed in 0u64..1000, dim in 1usize..20) {
            let t = EmbeddingTable::random(9, 3, dim, seed);
            for s in 0..9 {
                for p in 0..3 {
                    let fast = t.raw_scores(EntityId(s as u32), RelationId(p as u32)).unwrap();
                    for (o, &v) in fast.iter().enumerate() {
                        prop_assert!((v as f64 - four_term(&t, s, p, o)).abs() < 1e-4);
                    }
                }
            }
        }

        #[test]
        fn normalised_scores_in_unit_interval(seed in 0u64..1000) {
            let t = EmbeddingTable::random(20, 2, 8, seed);
            let v = neural_scores(&t, EntityId(3), RelationId(1), Normalization::MinMax).unwrap();
            prop_assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn batch_matches_single_calls() {
        let t = EmbeddingTable::random(700, 2, 6, 5);
        let subjects = [EntityId(3), EntityId(699), EntityId(3), EntityId(0)];
        let batch = t.raw_scores_batch(&subjects, RelationId(1)).unwrap();
        for (s, b) in subjects.iter().zip(&batch) {
            assert_eq!(&t.raw_scores(*s, RelationId(1)).unwrap(), b);
        }
        let scorer = ComplexScorer::new(t, Normalization::MinMax);
        let vs = scorer.score_objects_batch(&subjects, RelationId(1)).unwrap();
        assert_eq!(
            vs[1].values(),
            scorer.score_objects(EntityId(699), RelationId(1)).unwrap().values()
        );
    }

    #[test]
    fn candidate_permutation_permutes_scores() {
        let t = EmbeddingTable::random(6, 1, 4, 3);
        let perm = [3usize, 0, 5, 1, 4, 2];
        let d = t.dim;
        let mut ent_re = vec![0.0; 6 * d];
        let mut ent_im = vec![0.0; 6 * d];
        for (new, &old) in perm.iter().enumerate() {
            ent_re[new * d..(new + 1) * d].copy_from_slice(&t.ent_re[old * d..(old + 1) * d]);
            ent_im[new * d..(new + 1) * d].copy_from_slice(&t.ent_im[old * d..(old + 1) * d]);
        }
        let permuted = EmbeddingTable::new(6, 1, d, ent_re, ent_im, t.rel_re.clone(), t.rel_im.clone()).unwrap();
        // subject 3 in the original is subject 0 after permutation
        let a = t.raw_scores(EntityId(3), RelationId(0)).unwrap();
        let b = permuted.raw_scores(EntityId(0), RelationId(0)).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            assert_eq!(a[old], b[new]);
        }
    }
}
