//! Lookup, weighted mean pooling and L2 normalization.
//!
//! Pooling accumulates in `f64`, sequentially over tokens in index order, and
//! rounds to `f32` once at the end. Single texts and batch slices go through
//! the same per-text routine, so batch output is bit-identical to the
//! single-text path.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model_store::EmbeddingModel;
use crate::tokenizer::tokenize;

/// Norms below this are treated as the zero vector.
pub const ZERO_NORM_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("input has no tokens")]
    EmptyInput,
    #[error("pooling weights sum to zero for this input")]
    DegenerateWeights,
    #[error("embedding is the zero vector")]
    ZeroVector,
    #[error("batch contains no texts")]
    EmptyBatch,
    #[error("shape error: {0}")]
    ShapeError(String),
    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },
    #[error("invalid pooling config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolingStrategy {
    #[default]
    Uniform,
    Weighted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroVectorPolicy {
    #[default]
    Error,
    ReturnZero,
}

impl std::str::FromStr for ZeroVectorPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "error" => Ok(Self::Error),
            "return_zero" | "return-zero" | "zero" => Ok(Self::ReturnZero),
            other => Err(format!("unknown zero vector policy {other:?} (use error|return_zero)")),
        }
    }
}

/// How token vectors are combined. The library default is uniform weights with
/// [`ZeroVectorPolicy::Error`].
#[derive(Debug, Clone, Default)]
pub struct PoolingConfig {
    strategy: PoolingStrategy,
    weights: Option<Arc<[f32]>>,
    pub zero_vector_policy: ZeroVectorPolicy,
}

impl PoolingConfig {
    pub fn uniform(zero_vector_policy: ZeroVectorPolicy) -> Self {
        Self { strategy: PoolingStrategy::Uniform, weights: None, zero_vector_policy }
    }

    /// Per-token-id weights. All weights must be finite and non-negative with
    /// at least one positive entry.
    pub fn weighted(
        weights: impl Into<Arc<[f32]>>,
        zero_vector_policy: ZeroVectorPolicy,
    ) -> Result<Self, EmbedError> {
        let weights = weights.into();
        if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(EmbedError::InvalidConfig(format!("weight {bad} is not a finite value >= 0")));
        }
        if !weights.iter().any(|&w| w > 0.0) {
            return Err(EmbedError::InvalidConfig("all weights are zero".into()));
        }
        Ok(Self { strategy: PoolingStrategy::Weighted, weights: Some(weights), zero_vector_policy })
    }

    pub fn strategy(&self) -> PoolingStrategy {
        self.strategy
    }

    pub fn weights(&self) -> Option<&[f32]> {
        self.weights.as_deref()
    }

    /// Checks the weight table length against a vocabulary size.
    pub fn check_vocab(&self, vocab_size: usize) -> Result<(), EmbedError> {
        match &self.weights {
            Some(w) if w.len() != vocab_size => Err(EmbedError::InvalidConfig(format!(
                "weight table has {} entries, vocabulary has {vocab_size}",
                w.len()
            ))),
            _ => Ok(()),
        }
    }
}

/// A pipeline output vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledEmbedding {
    pub values: Vec<f32>,
    pub norm_applied: bool,
}

impl PooledEmbedding {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// A batch of token sequences: one flat id array plus `B + 1` offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaggedBatch {
    ids: Vec<u32>,
    offsets: Vec<usize>,
}

impl RaggedBatch {
    pub fn new(ids: Vec<u32>, offsets: Vec<usize>) -> Result<Self, EmbedError> {
        match offsets.first() {
            None => return Err(EmbedError::ShapeError("offsets must not be empty".into())),
            Some(&first) if first != 0 => {
                return Err(EmbedError::ShapeError(format!("offsets[0] is {first}, must be 0")))
            }
            _ => {}
        }
        if let Some(w) = offsets.windows(2).find(|w| w[1] < w[0]) {
            return Err(EmbedError::ShapeError(format!("offsets decrease from {} to {}", w[0], w[1])));
        }
        let last = *offsets.last().unwrap();
        if last != ids.len() {
            return Err(EmbedError::ShapeError(format!(
                "final offset {last} does not match {} ids",
                ids.len()
            )));
        }
        Ok(Self { ids, offsets })
    }

    pub(crate) fn from_parts_unchecked(ids: Vec<u32>, offsets: Vec<usize>) -> Self {
        debug_assert!(Self::new(ids.clone(), offsets.clone()).is_ok());
        Self { ids, offsets }
    }

    /// Builds a batch from already tokenized sequences.
    pub fn from_sequences<I, T>(seqs: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u32]>,
    {
        let mut ids = Vec::new();
        let mut offsets = vec![0];
        for s in seqs {
            ids.extend_from_slice(s.as_ref());
            offsets.push(ids.len());
        }
        Self { ids, offsets }
    }

    /// Number of texts (B).
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn slice(&self, k: usize) -> &[u32] {
        &self.ids[self.offsets[k]..self.offsets[k + 1]]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        self.offsets.windows(2).map(|w| &self.ids[w[0]..w[1]])
    }
}

/// Read access to embedding rows by token id.
pub trait EmbeddingRows {
    fn dim(&self) -> usize;
    fn vocab_size(&self) -> usize;
    /// Row `id`; callers guarantee `id < vocab_size()`.
    fn row(&self, id: u32) -> &[f32];
}

impl EmbeddingRows for EmbeddingModel {
    fn dim(&self) -> usize {
        EmbeddingModel::dim(self)
    }

    fn vocab_size(&self) -> usize {
        EmbeddingModel::vocab_size(self)
    }

    #[inline]
    fn row(&self, id: u32) -> &[f32] {
        EmbeddingModel::row(self, id)
    }
}

/// Weighted mean of the rows for `ids` (unnormalized).
pub fn pool<R: EmbeddingRows + ?Sized>(
    rows: &R,
    ids: &[u32],
    cfg: &PoolingConfig,
) -> Result<Vec<f32>, EmbedError> {
    if ids.is_empty() {
        return Err(EmbedError::EmptyInput);
    }
    let vocab_size = rows.vocab_size();
    if let Some(&id) = ids.iter().find(|&&id| id as usize >= vocab_size) {
        return Err(EmbedError::TokenOutOfRange { id, vocab_size });
    }
    let mut acc = vec![0f64; rows.dim()];
    let total = match cfg.weights() {
        Some(weights) if cfg.strategy() == PoolingStrategy::Weighted => {
            cfg.check_vocab(vocab_size)?;
            let mut total = 0f64;
            for &id in ids {
                let a = weights[id as usize] as f64;
                total += a;
                if a != 0.0 {
                    for (s, &x) in acc.iter_mut().zip(rows.row(id)) {
                        *s += a * x as f64;
                    }
                }
            }
            if total == 0.0 {
                return Err(EmbedError::DegenerateWeights);
            }
            total
        }
        _ => {
            for &id in ids {
                for (s, &x) in acc.iter_mut().zip(rows.row(id)) {
                    *s += x as f64;
                }
            }
            ids.len() as f64
        }
    };
    Ok(acc.into_iter().map(|s| (s / total) as f32).collect())
}

/// Scales `h` to unit length. Vectors with norm below
/// [`ZERO_NORM_THRESHOLD`] follow `policy`.
pub fn normalize(mut h: Vec<f32>, policy: ZeroVectorPolicy) -> Result<PooledEmbedding, EmbedError> {
    if let Some(bad) = h.iter().find(|v| !v.is_finite()) {
        return Err(EmbedError::ShapeError(format!("non-finite input {bad}")));
    }
    let norm = h.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
    if norm < ZERO_NORM_THRESHOLD {
        return match policy {
            ZeroVectorPolicy::Error => Err(EmbedError::ZeroVector),
            ZeroVectorPolicy::ReturnZero => {
                h.iter_mut().for_each(|v| *v = 0.0);
                Ok(PooledEmbedding { values: h, norm_applied: true })
            }
        };
    }
    for v in &mut h {
        *v = (*v as f64 / norm) as f32;
    }
    Ok(PooledEmbedding { values: h, norm_applied: true })
}

/// Pool then normalize one token sequence. Under
/// [`ZeroVectorPolicy::ReturnZero`] empty inputs and zero-weight inputs yield
/// the zero vector instead of an error.
pub fn embed_tokens<R: EmbeddingRows + ?Sized>(
    rows: &R,
    ids: &[u32],
    cfg: &PoolingConfig,
) -> Result<PooledEmbedding, EmbedError> {
    match pool(rows, ids, cfg) {
        Ok(h) => normalize(h, cfg.zero_vector_policy),
        Err(EmbedError::EmptyInput | EmbedError::DegenerateWeights)
            if cfg.zero_vector_policy == ZeroVectorPolicy::ReturnZero =>
        {
            Ok(PooledEmbedding { values: vec![0.0; rows.dim()], norm_applied: true })
        }
        Err(e) => Err(e),
    }
}

pub fn embed_text(
    model: &EmbeddingModel,
    text: &str,
    cfg: &PoolingConfig,
) -> Result<PooledEmbedding, EmbedError> {
    embed_tokens(model, tokenize(model, text).ids(), cfg)
}

pub fn embed_batch<R: EmbeddingRows + ?Sized>(
    rows: &R,
    batch: &RaggedBatch,
    cfg: &PoolingConfig,
) -> Result<Vec<PooledEmbedding>, EmbedError> {
    if batch.is_empty() {
        return Err(EmbedError::EmptyBatch);
    }
    batch.iter().map(|ids| embed_tokens(rows, ids, cfg)).collect()
}

/// Dot product of two unit vectors, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &PooledEmbedding, b: &PooledEmbedding) -> Result<f32, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::ShapeError(format!("dimension {} vs {}", a.dim(), b.dim())));
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(&x, &y)| x as f64 * y as f64).sum();
    Ok(dot.clamp(-1.0, 1.0) as f32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_store::ModelManifest;
    use crate::synth::random_model;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::cell::Cell;

    fn model(tokens: &[&str], rows: &[&[f32]]) -> EmbeddingModel {
        let dim = rows[0].len() as u32;
        EmbeddingModel::new(
            ModelManifest::new("t", tokens.len() as u32, dim, 0),
            tokens.iter().map(|t| t.to_string()).collect(),
            rows.concat(),
        )
        .unwrap()
    }

    struct Counting<'a> {
        inner: &'a EmbeddingModel,
        reads: Cell<usize>,
    }

    impl EmbeddingRows for Counting<'_> {
        fn dim(&self) -> usize {
            self.inner.dim()
        }
        fn vocab_size(&self) -> usize {
            self.inner.vocab_size()
        }
        fn row(&self, id: u32) -> &[f32] {
            self.reads.set(self.reads.get() + 1);
            self.inner.row(id)
        }
    }

    fn oracle_pool(m: &EmbeddingModel, ids: &[u32], weights: Option<&[f32]>) -> Vec<f64> {
        let dim = m.dim();
        let mut num = vec![0f64; dim];
        let mut den = 0f64;
        for &id in ids {
            let a = weights.map_or(1.0, |w| w[id as usize] as f64);
            den += a;
            let row = m.lookup_row(id).unwrap();
            for j in 0..dim {
                num[j] += a * row[j] as f64;
            }
        }
        num.into_iter().map(|v| v / den).collect()
    }

    #[test]
    fn single_token_is_identity() {
        let m = model(&["x"], &[&[3.0, 4.0]]);
        assert_eq!(pool(&m, &[0], &PoolingConfig::default()).unwrap(), [3.0, 4.0]);
    }

    #[test]
    fn symmetric_mean() {
        let m = model(&["x", "y"], &[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(pool(&m, &[0, 1], &PoolingConfig::default()).unwrap(), [0.5, 0.5]);
    }

    #[test]
    fn pool_errors() {
        let m = model(&["x", "y"], &[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(pool(&m, &[], &PoolingConfig::default()), Err(EmbedError::EmptyInput));
        assert!(matches!(
            pool(&m, &[2], &PoolingConfig::default()),
            Err(EmbedError::TokenOutOfRange { id: 2, .. })
        ));
        let cfg = PoolingConfig::weighted(vec![0.0, 1.0], ZeroVectorPolicy::Error).unwrap();
        assert_eq!(pool(&m, &[0, 0], &cfg), Err(EmbedError::DegenerateWeights));
        assert_eq!(pool(&m, &[0, 1], &cfg).unwrap(), [0.0, 1.0]);
        let short = PoolingConfig::weighted(vec![1.0], ZeroVectorPolicy::Error).unwrap();
        assert!(matches!(pool(&m, &[0], &short), Err(EmbedError::InvalidConfig(_))));
    }

    #[test]
    fn weighted_config_validation() {
        assert!(PoolingConfig::weighted(vec![0.0, 0.0], ZeroVectorPolicy::Error).is_err());
        assert!(PoolingConfig::weighted(vec![-1.0, 2.0], ZeroVectorPolicy::Error).is_err());
        assert!(PoolingConfig::weighted(vec![f32::NAN], ZeroVectorPolicy::Error).is_err());
        assert!(PoolingConfig::weighted(vec![0.0, 2.0], ZeroVectorPolicy::Error).is_ok());
    }

    #[test]
    fn weighted_seven_tokens_match_oracle() {
        let m = random_model(50, 16, 7);
        let mut rng = StdRng::seed_from_u64(11);
        let weights: Vec<f32> = (0..50).map(|_| rng.random_range(0.0..3.0)).collect();
        let cfg = PoolingConfig::weighted(weights.clone(), ZeroVectorPolicy::Error).unwrap();
        let ids: Vec<u32> = (0..7).map(|_| rng.random_range(0..50)).collect();
        let got = pool(&m, &ids, &cfg).unwrap();
        let want = oracle_pool(&m, &ids, Some(&weights));
        for (g, w) in got.iter().zip(&want) {
            assert!((*g as f64 - w).abs() <= 1e-6 * w.abs().max(1e-30), "{g} vs {w}");
        }
    }

    #[test]
    fn normalize_cases() {
        let f = normalize(vec![3.0, 4.0], ZeroVectorPolicy::Error).unwrap();
        assert_eq!(f.values, [0.6, 0.8]);
        assert!(f.norm_applied);
        let z = normalize(vec![0.0, 0.0], ZeroVectorPolicy::ReturnZero).unwrap();
        assert_eq!(z, PooledEmbedding { values: vec![0.0, 0.0], norm_applied: true });
        assert_eq!(normalize(vec![0.0, 0.0], ZeroVectorPolicy::Error), Err(EmbedError::ZeroVector));
        assert_eq!(normalize(vec![1e-13, 0.0], ZeroVectorPolicy::Error), Err(EmbedError::ZeroVector));
    }

    #[test]
    fn normalize_random_384_is_unit() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..1000 {
            let h: Vec<f32> = (0..384).map(|_| rng.random_range(-10.0..10.0)).collect();
            let f = normalize(h, ZeroVectorPolicy::Error).unwrap();
            let norm: f64 = f.values.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-6, "{norm}");
        }
    }

    #[test]
    fn embed_text_examples() {
        let m = model(&["hello"], &[&[3.0, 4.0]]);
        let cfg = PoolingConfig::default();
        assert_eq!(embed_text(&m, "hello", &cfg).unwrap().values, [0.6, 0.8]);
        assert_eq!(embed_text(&m, "", &cfg), Err(EmbedError::EmptyInput));
        let lenient = PoolingConfig::uniform(ZeroVectorPolicy::ReturnZero);
        assert_eq!(embed_text(&m, "", &lenient).unwrap().values, [0.0, 0.0]);
    }

    #[test]
    fn embed_text_is_composition() {
        let m = random_model(300, 24, 5);
        let cfg = PoolingConfig::default();
        let mut rng = StdRng::seed_from_u64(99);
        for _ in 0..200 {
            let text = crate::synth::random_text(&m, rng.random_range(1..30), &mut rng);
            let composed = normalize(
                pool(&m, tokenize(&m, &text).ids(), &cfg).unwrap(),
                cfg.zero_vector_policy,
            )
            .unwrap();
            let direct = embed_text(&m, &text, &cfg).unwrap();
            let bits = |e: &PooledEmbedding| e.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&composed), bits(&direct));
        }
    }

    #[test]
    fn batch_cases() {
        let m = random_model(200, 8, 1);
        let cfg = PoolingConfig::default();
        let single = embed_text(&m, "the", &cfg).unwrap();
        let batch = crate::tokenizer::tokenize_batch(&m, &["the"]).unwrap();
        assert_eq!(embed_batch(&m, &batch, &cfg).unwrap(), vec![single]);

        let empty = RaggedBatch::new(vec![], vec![0]).unwrap();
        assert_eq!(embed_batch(&m, &empty, &cfg), Err(EmbedError::EmptyBatch));
    }

    #[test]
    fn batch_of_64_matches_per_text() {
        let m = random_model(500, 32, 2);
        let cfg = PoolingConfig::default();
        let mut rng = StdRng::seed_from_u64(8);
        let texts: Vec<String> =
            (0..64).map(|_| crate::synth::random_text(&m, rng.random_range(1..40), &mut rng)).collect();
        let batch = crate::tokenizer::tokenize_batch(&m, &texts).unwrap();
        let out = embed_batch(&m, &batch, &cfg).unwrap();
        for (text, got) in texts.iter().zip(&out) {
            let want = embed_text(&m, text, &cfg).unwrap();
            for (g, w) in got.values.iter().zip(&want.values) {
                assert!((g - w).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn ragged_batch_validation() {
        assert!(matches!(RaggedBatch::new(vec![], vec![]), Err(EmbedError::ShapeError(_))));
        assert!(matches!(RaggedBatch::new(vec![1], vec![1, 1]), Err(EmbedError::ShapeError(_))));
        assert!(matches!(RaggedBatch::new(vec![1, 2], vec![0, 2, 1]), Err(EmbedError::ShapeError(_))));
        assert!(matches!(RaggedBatch::new(vec![1, 2], vec![0, 1]), Err(EmbedError::ShapeError(_))));
        let b = RaggedBatch::new(vec![4, 5, 6], vec![0, 0, 2, 3]).unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b.iter().collect::<Vec<_>>(), vec![&[][..], &[4, 5][..], &[6][..]]);
    }

    #[test]
    fn ragged_empty_slice_follows_policy() {
        let m = random_model(20, 4, 4);
        let b = RaggedBatch::new(vec![3], vec![0, 0, 1]).unwrap();
        assert_eq!(embed_batch(&m, &b, &PoolingConfig::default()), Err(EmbedError::EmptyInput));
        let out = embed_batch(&m, &b, &PoolingConfig::uniform(ZeroVectorPolicy::ReturnZero)).unwrap();
        assert!(out[0].is_zero());
        assert!(!out[1].is_zero());
    }

    #[test]
    fn row_reads_are_linear() {
        let m = random_model(100, 8, 6);
        let counting = Counting { inner: &m, reads: Cell::new(0) };
        let cfg = PoolingConfig::default();
        pool(&counting, &[1, 5, 5, 9, 2], &cfg).unwrap();
        assert_eq!(counting.reads.get(), 5);

        counting.reads.set(0);
        let batch = RaggedBatch::from_sequences([vec![1, 2, 3], vec![], vec![4; 10]]);
        embed_batch(&counting, &batch, &PoolingConfig::uniform(ZeroVectorPolicy::ReturnZero)).unwrap();
        assert_eq!(counting.reads.get(), 13);
    }

    #[test]
    fn cosine_cases() {
        let a = PooledEmbedding { values: vec![0.6, 0.8], norm_applied: true };
        let b = PooledEmbedding { values: vec![-0.8, 0.6], norm_applied: true };
        assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() <= 1e-6);
        assert!(cosine_similarity(&a, &b).unwrap().abs() <= 1e-6);
        let c = PooledEmbedding { values: vec![1.0], norm_applied: true };
        assert!(matches!(cosine_similarity(&a, &c), Err(EmbedError::ShapeError(_))));
    }

    #[test]
    fn cosine_random_matches_oracle() {
        let mut rng = StdRng::seed_from_u64(21);
        for _ in 0..100 {
            let mk = |rng: &mut StdRng| {
                let h: Vec<f32> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
                normalize(h, ZeroVectorPolicy::Error).unwrap()
            };
            let (a, b) = (mk(&mut rng), mk(&mut rng));
            let oracle: f64 = (0..64).map(|i| a.values[i] as f64 * b.values[i] as f64).sum();
            assert!((cosine_similarity(&a, &b).unwrap() as f64 - oracle).abs() <= 1e-6);
        }
    }

    proptest! {
        #[test]
        fn permutation_insensitive(seed in 0u64..1000, len in 1usize..64) {
            let m = random_model(80, 16, 9);
            let mut rng = StdRng::seed_from_u64(seed);
            let ids: Vec<u32> = (0..len).map(|_| rng.random_range(0..80)).collect();
            let mut shuffled = ids.clone();
            rand::seq::SliceRandom::shuffle(&mut shuffled[..], &mut rng);
            let cfg = PoolingConfig::default();
            let a = pool(&m, &ids, &cfg).unwrap();
            let b = pool(&m, &shuffled, &cfg).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-6);
            }
        }

        #[test]
        fn weight_scaling_invariant(seed in 0u64..1000, scale in 0.01f32..100.0) {
            let m = random_model(40, 8, 10);
            let mut rng = StdRng::seed_from_u64(seed);
            let weights: Vec<f32> = (0..40).map(|_| rng.random_range(0.1..2.0)).collect();
            let scaled: Vec<f32> = weights.iter().map(|w| w * scale).collect();
            let ids: Vec<u32> = (0..12).map(|_| rng.random_range(0..40)).collect();
            let a = pool(&m, &ids, &PoolingConfig::weighted(weights, ZeroVectorPolicy::Error).unwrap()).unwrap();
            let b = pool(&m, &ids, &PoolingConfig::weighted(scaled, ZeroVectorPolicy::Error).unwrap()).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-6);
            }
        }
    }
}
