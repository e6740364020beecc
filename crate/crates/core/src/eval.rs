//! Quality metrics and a small evaluation driver: Spearman correlation for
//! similarity pairs, average precision for duplicate pairs, and embedding
//! latency by text length.

use std::time::Instant;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{cosine_similarity, embed_text, EmbedError, PoolingConfig};
use crate::model_store::EmbeddingModel;
use crate::pipeline::Pipeline;
use crate::synth::{random_text_from, word_tokens};
use crate::tokenizer::tokenize;
use crate::wire::WireFormat;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("shape error: {0}")]
    ShapeError(String),
    #[error("metric undefined: {0}")]
    Undefined(&'static str),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset {name}: {reason}")]
    DataError { name: String, reason: String },
    #[error("dataset {name}: {source}")]
    Metric { name: String, source: MetricError },
    #[error("dataset {name}: {source}")]
    Embed { name: String, source: EmbedError },
}

/// 1-based ranks, tied values sharing the mean of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank mean((i+1)..=j)
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average-rank tie handling.
pub fn spearman_correlation(predicted: &[f64], gold: &[f64]) -> Result<f64, MetricError> {
    if predicted.len() != gold.len() {
        return Err(MetricError::ShapeError(format!(
            "{} predictions for {} gold values",
            predicted.len(),
            gold.len()
        )));
    }
    if predicted.len() < 3 {
        return Err(MetricError::ShapeError(format!("need at least 3 items, got {}", predicted.len())));
    }
    if predicted.iter().chain(gold).any(|v| v.is_nan()) {
        return Err(MetricError::ShapeError("NaN input".into()));
    }
    pearson(&average_ranks(predicted), &average_ranks(gold))
        .ok_or(MetricError::Undefined("constant input has zero rank variance"))
}

/// Mean over positives of precision at the positive's rank, ranking by
/// descending score with ties kept in input order.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::ShapeError(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|v| v.is_nan()) {
        return Err(MetricError::ShapeError("NaN score".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(MetricError::Undefined("no positive labels"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Similarity,
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub a: String,
    pub b: String,
    pub gold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPairSet {
    pub name: String,
    pub kind: TaskKind,
    pub pairs: Vec<LabeledPair>,
}

pub const MIN_SIMILARITY_PAIRS: usize = 10;

impl LabeledPairSet {
    pub fn validate(&self) -> Result<(), EvalError> {
        let fail = |reason: String| Err(EvalError::DataError { name: self.name.clone(), reason });
        if self.pairs.is_empty() {
            return fail("no pairs".into());
        }
        match self.kind {
            TaskKind::Similarity => {
                if self.pairs.len() < MIN_SIMILARITY_PAIRS {
                    return fail(format!(
                        "{} pairs, similarity tasks need at least {MIN_SIMILARITY_PAIRS}",
                        self.pairs.len()
                    ));
                }
                if let Some((i, p)) =
                    self.pairs.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(&p.gold))
                {
                    return fail(format!("pair {i} gold {} outside [0, 1]", p.gold));
                }
            }
            TaskKind::Duplicate => {
                if let Some((i, p)) =
                    self.pairs.iter().enumerate().find(|(_, p)| p.gold != 0.0 && p.gold != 1.0)
                {
                    return fail(format!("pair {i} label {} is not 0 or 1", p.gold));
                }
                if !self.pairs.iter().any(|p| p.gold == 1.0) {
                    return fail("no positive pairs".into());
                }
            }
        }
        Ok(())
    }
}

/// Parses a JSON list of `{"a", "b", "gold"}` records. Without an explicit
/// kind, a set whose labels are all 0 or 1 is a duplicate-detection task.
pub fn parse_dataset(
    name: &str,
    json: &[u8],
    kind: Option<TaskKind>,
) -> Result<LabeledPairSet, EvalError> {
    let pairs: Vec<LabeledPair> = serde_json::from_slice(json)
        .map_err(|e| EvalError::DataError { name: name.into(), reason: e.to_string() })?;
    let kind = kind.unwrap_or_else(|| {
        if pairs.iter().all(|p| p.gold == 0.0 || p.gold == 1.0) {
            TaskKind::Duplicate
        } else {
            TaskKind::Similarity
        }
    });
    let set = LabeledPairSet { name: name.into(), kind, pairs };
    set.validate()?;
    Ok(set)
}

fn word_pool(model: &EmbeddingModel, name: &str, need: usize) -> Result<Vec<u32>, EvalError> {
    let pool = word_tokens(model);
    if pool.len() < need {
        return Err(EvalError::DataError {
            name: name.into(),
            reason: format!("model has {} whole-word tokens, need {need}", pool.len()),
        });
    }
    Ok(pool)
}

/// Alternating exact-duplicate pairs and pairs drawn from disjoint halves of
/// the model's word tokens.
pub fn builtin_duplicates(model: &EmbeddingModel, seed: u64) -> Result<LabeledPairSet, EvalError> {
    const NAME: &str = "builtin-duplicates";
    let mut pool = word_pool(model, NAME, 2)?;
    let mut rng = StdRng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    let (left, right) = pool.split_at(pool.len() / 2);
    let mut pairs = Vec::with_capacity(100);
    for _ in 0..50 {
        let words = rng.random_range(3..=12);
        let text = random_text_from(model, left, words, &mut rng);
        pairs.push(LabeledPair { a: text.clone(), b: text, gold: 1.0 });
        let a = random_text_from(model, left, rng.random_range(3..=12), &mut rng);
        let b = random_text_from(model, right, rng.random_range(3..=12), &mut rng);
        pairs.push(LabeledPair { a, b, gold: 0.0 });
    }
    Ok(LabeledPairSet { name: NAME.into(), kind: TaskKind::Duplicate, pairs })
}

fn jaccard(model: &EmbeddingModel, a: &str, b: &str) -> f64 {
    use rustc_hash::FxHashSet;
    let sa: FxHashSet<u32> = tokenize(model, a).into_ids().into_iter().collect();
    let sb: FxHashSet<u32> = tokenize(model, b).into_ids().into_iter().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

/// Pairs with varying word overlap, gold = Jaccard similarity of token id sets.
pub fn builtin_similarity(model: &EmbeddingModel, seed: u64) -> Result<LabeledPairSet, EvalError> {
    const NAME: &str = "builtin-similarity";
    let pool = word_pool(model, NAME, 2)?;
    let mut rng = StdRng::seed_from_u64(seed);
    let vocab = model.vocabulary();
    let mut pairs = Vec::with_capacity(100);
    for _ in 0..100 {
        let len = 8;
        let a_ids: Vec<u32> = (0..len).map(|_| pool[rng.random_range(0..pool.len())]).collect();
        let keep = rng.random_range(0..=len);
        let b_ids: Vec<u32> = a_ids[..keep]
            .iter()
            .copied()
            .chain((keep..len).map(|_| pool[rng.random_range(0..pool.len())]))
            .collect();
        let render = |ids: &[u32]| {
            ids.iter().map(|&id| vocab.token(id).unwrap()).collect::<Vec<_>>().join(" ")
        };
        let (a, b) = (render(&a_ids), render(&b_ids));
        let gold = jaccard(model, &a, &b);
        pairs.push(LabeledPair { a, b, gold });
    }
    Ok(LabeledPairSet { name: NAME.into(), kind: TaskKind::Similarity, pairs })
}

pub fn builtin_datasets(model: &EmbeddingModel, seed: u64) -> Result<Vec<LabeledPairSet>, EvalError> {
    Ok(vec![builtin_similarity(model, seed)?, builtin_duplicates(model, seed)?])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LengthBucket {
    pub label: &'static str,
    pub min_words: usize,
    /// Inclusive; `None` for the open-ended last bucket.
    pub max_words: Option<usize>,
}

pub const LENGTH_BUCKETS: [LengthBucket; 4] = [
    LengthBucket { label: "1-20", min_words: 1, max_words: Some(20) },
    LengthBucket { label: "20-50", min_words: 21, max_words: Some(50) },
    LengthBucket { label: "50-100", min_words: 51, max_words: Some(100) },
    LengthBucket { label: "100+", min_words: 101, max_words: None },
];

/// Word count range used when generating texts for the open-ended bucket.
const LONGEST_GENERATED: usize = 200;

pub fn bucket_for(words: usize) -> Option<usize> {
    LENGTH_BUCKETS
        .iter()
        .position(|b| words >= b.min_words && b.max_words.is_none_or(|max| words <= max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketLatency {
    pub bucket: String,
    pub texts: usize,
    pub mean_words: f64,
    pub mean_tokens: f64,
    pub mean_latency_ms: f64,
}

/// `per_bucket` random texts for each length bucket, interleaved.
pub fn synthetic_length_corpus(model: &EmbeddingModel, per_bucket: usize, seed: u64) -> Vec<String> {
    let pool = word_tokens(model);
    let mut rng = StdRng::seed_from_u64(seed);
    let mut texts = Vec::with_capacity(per_bucket * LENGTH_BUCKETS.len());
    for _ in 0..per_bucket {
        for b in &LENGTH_BUCKETS {
            let max = b.max_words.unwrap_or(LONGEST_GENERATED);
            let words = rng.random_range(b.min_words..=max);
            texts.push(random_text_from(model, &pool, words, &mut rng));
        }
    }
    texts
}

/// Mean per-text latency of the single-text request path (tokenize, embed,
/// JSON encode), grouped by word count. Empty buckets are omitted.
pub fn length_scaling(
    model: &EmbeddingModel,
    cfg: &PoolingConfig,
    texts: &[String],
) -> Result<Vec<BucketLatency>, EvalError> {
    let pipeline = Pipeline::new(model, cfg);
    let measure = |text: &String| -> Result<(usize, f64), EvalError> {
        let fail = |source| EvalError::Embed { name: "length-scaling".into(), source };
        let start = Instant::now();
        let prepared = pipeline.prepare(&[text]).map_err(fail)?;
        let embeddings = pipeline.embed(&prepared).map_err(fail)?;
        let body = pipeline
            .encode(&prepared, &embeddings, WireFormat::Json)
            .map_err(|w| fail(EmbedError::ShapeError(w.to_string())))?;
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        std::hint::black_box(body);
        Ok((prepared.token_count(), elapsed))
    };
    // warm caches and the allocator
    for text in texts.iter().take(64) {
        measure(text)?;
    }
    let mut sums = [(0usize, 0usize, 0usize, 0f64); LENGTH_BUCKETS.len()];
    for text in texts {
        let words = text.split_whitespace().count();
        let Some(b) = bucket_for(words) else { continue };
        let (tokens, ms) = measure(text)?;
        let s = &mut sums[b];
        s.0 += 1;
        s.1 += words;
        s.2 += tokens;
        s.3 += ms;
    }
    Ok(LENGTH_BUCKETS
        .iter()
        .zip(sums)
        .filter(|(_, s)| s.0 > 0)
        .map(|(b, (n, words, tokens, ms))| BucketLatency {
            bucket: b.label.into(),
            texts: n,
            mean_words: words as f64 / n as f64,
            mean_tokens: tokens as f64 / n as f64,
            mean_latency_ms: ms / n as f64,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub name: String,
    pub kind: TaskKind,
    pub pairs: usize,
    /// Spearman for similarity tasks, average precision for duplicate tasks.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean over similarity tasks.
    pub spearman: Option<f64>,
    /// Mean over duplicate tasks.
    pub duplicate_ap: Option<f64>,
    pub length_scaling: Vec<BucketLatency>,
    pub tasks: Vec<TaskResult>,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub texts_per_bucket: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { texts_per_bucket: 1000, seed: 0x5eed }
    }
}

pub fn run_eval(
    model: &EmbeddingModel,
    datasets: &[LabeledPairSet],
    cfg: &PoolingConfig,
    opts: &EvalOptions,
) -> Result<EvalReport, EvalError> {
    let mut tasks = Vec::with_capacity(datasets.len());
    for set in datasets {
        set.validate()?;
        let embed_err = |source| EvalError::Embed { name: set.name.clone(), source };
        let mut scores = Vec::with_capacity(set.pairs.len());
        for pair in &set.pairs {
            let a = embed_text(model, &pair.a, cfg).map_err(embed_err)?;
            let b = embed_text(model, &pair.b, cfg).map_err(embed_err)?;
            scores.push(cosine_similarity(&a, &b).map_err(embed_err)? as f64);
        }
        let metric_err = |source| EvalError::Metric { name: set.name.clone(), source };
        let score = match set.kind {
            TaskKind::Similarity => {
                let gold: Vec<f64> = set.pairs.iter().map(|p| p.gold).collect();
                spearman_correlation(&scores, &gold).map_err(metric_err)?
            }
            TaskKind::Duplicate => {
                let labels: Vec<bool> = set.pairs.iter().map(|p| p.gold == 1.0).collect();
                average_precision(&scores, &labels).map_err(metric_err)?
            }
        };
        tasks.push(TaskResult { name: set.name.clone(), kind: set.kind, pairs: set.pairs.len(), score });
    }
    let mean_of = |kind| {
        let s: Vec<f64> = tasks.iter().filter(|t| t.kind == kind).map(|t| t.score).collect();
        (!s.is_empty()).then(|| s.iter().sum::<f64>() / s.len() as f64)
    };
    let corpus = synthetic_length_corpus(model, opts.texts_per_bucket, opts.seed);
    Ok(EvalReport {
        spearman: mean_of(TaskKind::Similarity),
        duplicate_ap: mean_of(TaskKind::Duplicate),
        length_scaling: length_scaling(model, cfg, &corpus)?,
        tasks,
    })
}
