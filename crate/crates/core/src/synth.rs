//! Deterministic synthetic models and texts for tests, benchmarks and the
//! built-in evaluation sets.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

use crate::model_store::{EmbeddingModel, ModelManifest};

pub const UNK_TOKEN: &str = "[UNK]";

const COMMON_WORDS: &[&str] = &[
    "the", "of", "and", "to", "in", "is", "was", "for", "on", "that", "with", "as", "it", "by",
    "at", "from", "his", "an", "were", "are", "which", "this", "be", "or", "has", "had", "not",
    "first", "one", "their", "its", "new", "after", "but", "who", "they", "two", "her", "she",
    "been", "other", "when", "time", "during", "there", "into", "school", "more", "may", "years",
    "over", "only", "year", "most", "would", "world", "city", "some", "where", "between", "later",
    "three", "state", "such", "then", "national", "used", "made", "known", "under", "many",
    "university", "united", "while", "part", "season", "team", "these", "american", "than", "film",
    "second", "born", "south", "became", "states", "war", "through", "being", "including", "both",
    "before", "north", "high", "however", "people", "family", "early", "history", "album", "area",
    "text", "embedding", "vector", "search", "query", "model", "fast", "quick", "brown", "fox",
    "jumps", "lazy", "dog", "hello", "static", "token", "lookup", "latency", "server", "request",
];

/// A model with `[UNK]` at id 0, single lowercase letters, common English
/// words, then random lowercase strings; rows are standard-normal.
pub fn random_model(vocab_size: usize, dim: usize, seed: u64) -> EmbeddingModel {
    assert!(vocab_size >= 1 && dim >= 1);
    let mut rng = StdRng::seed_from_u64(seed);
    let tokens = random_vocab(vocab_size, &mut rng);
    let matrix: Vec<f32> = (0..vocab_size * dim).map(|_| rng.sample(StandardNormal)).collect();
    let manifest =
        ModelManifest::new(format!("synthetic-{vocab_size}x{dim}"), vocab_size as u32, dim as u32, 0);
    EmbeddingModel::new(manifest, tokens, matrix).expect("synthetic model is valid")
}

pub fn random_vocab(vocab_size: usize, rng: &mut impl Rng) -> Vec<String> {
    let mut seen = rustc_hash::FxHashSet::default();
    let mut tokens = Vec::with_capacity(vocab_size);
    let fixed = std::iter::once(UNK_TOKEN.to_string())
        .chain((b'a'..=b'z').map(|c| (c as char).to_string()))
        .chain(COMMON_WORDS.iter().map(|w| w.to_string()));
    for token in fixed.take(vocab_size) {
        seen.insert(token.clone());
        tokens.push(token);
    }
    while tokens.len() < vocab_size {
        let len = rng.random_range(2..=9);
        let token: String = (0..len).map(|_| rng.random_range(b'a'..=b'z') as char).collect();
        if seen.insert(token.clone()) {
            tokens.push(token);
        }
    }
    tokens
}

/// Whole-word tokens of `model`: entries without whitespace that survive the
/// model's case folding unchanged. Each one tokenizes to exactly itself.
pub fn word_tokens(model: &EmbeddingModel) -> Vec<u32> {
    let unk = model.manifest().unk_token_id;
    let fold = model.manifest().case_folding;
    model
        .vocabulary()
        .tokens()
        .iter()
        .enumerate()
        .filter(|&(id, t)| {
            id as u32 != unk
                && !t.chars().any(char::is_whitespace)
                && (!fold || t.to_lowercase() == *t)
        })
        .map(|(id, _)| id as u32)
        .collect()
}

/// `words` space-separated vocabulary words drawn uniformly.
pub fn random_text(model: &EmbeddingModel, words: usize, rng: &mut impl Rng) -> String {
    let pool = word_tokens(model);
    random_text_from(model, &pool, words, rng)
}

pub fn random_text_from(
    model: &EmbeddingModel,
    pool: &[u32],
    words: usize,
    rng: &mut impl Rng,
) -> String {
    let vocab = model.vocabulary();
    let mut out = String::new();
    for i in 0..words {
        if i > 0 {
            out.push(' ');
        }
        if pool.is_empty() {
            out.push_str("zz");
        } else {
            out.push_str(vocab.token(pool[rng.random_range(0..pool.len())]).unwrap());
        }
    }
    out
}
