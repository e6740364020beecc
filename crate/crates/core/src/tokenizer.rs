//! Greedy longest-match subword tokenization against a model vocabulary.
//!
//! Text is optionally case folded (per the model manifest), split on Unicode
//! whitespace, and each word is consumed left to right by the longest
//! vocabulary entry starting at the current character. A character that starts
//! no entry is skipped; each maximal run of skipped characters inside a word
//! emits the unknown token once.

use std::borrow::Cow;

use crate::embed::{EmbedError, RaggedBatch};
use crate::model_store::{EmbeddingModel, Vocabulary};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSequence {
    ids: Vec<u32>,
}

impl TokenSequence {
    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn token_count(&self) -> usize {
        self.ids.len()
    }

    pub fn into_ids(self) -> Vec<u32> {
        self.ids
    }
}

impl From<Vec<u32>> for TokenSequence {
    fn from(ids: Vec<u32>) -> Self {
        Self { ids }
    }
}

pub fn tokenize(model: &EmbeddingModel, text: &str) -> TokenSequence {
    let mut ids = Vec::new();
    tokenize_into(model, text, &mut ids);
    TokenSequence { ids }
}

/// Appends the token ids for `text` to `out`.
pub fn tokenize_into(model: &EmbeddingModel, text: &str, out: &mut Vec<u32>) {
    let text: Cow<'_, str> =
        if model.manifest().case_folding { Cow::Owned(text.to_lowercase()) } else { text.into() };
    let vocab = model.vocabulary();
    let unk = model.manifest().unk_token_id;
    let mut bounds = Vec::new();
    for word in text.split_whitespace() {
        bounds.clear();
        bounds.extend(word.char_indices().map(|(i, _)| i));
        bounds.push(word.len());
        match_word(vocab, unk, word, &bounds, out);
    }
}

/// `bounds` holds the byte offset of every char in `word` plus `word.len()`.
fn match_word(vocab: &Vocabulary, unk: u32, word: &str, bounds: &[usize], out: &mut Vec<u32>) {
    let chars = bounds.len() - 1;
    let max_len = vocab.max_token_chars();
    let mut pos = 0;
    let mut in_unknown_run = false;
    while pos < chars {
        let longest = (1..=max_len.min(chars - pos))
            .rev()
            .find_map(|len| vocab.get(&word[bounds[pos]..bounds[pos + len]]).map(|id| (id, len)));
        match longest {
            Some((id, len)) => {
                out.push(id);
                pos += len;
                in_unknown_run = false;
            }
            None => {
                if !in_unknown_run {
                    out.push(unk);
                    in_unknown_run = true;
                }
                pos += 1;
            }
        }
    }
}

/// Tokenizes every text into one flat id array with per-text offsets.
pub fn tokenize_batch<S: AsRef<str>>(
    model: &EmbeddingModel,
    texts: &[S],
) -> Result<RaggedBatch, EmbedError> {
    tokenize_batch_truncated(model, texts, None).map(|(batch, _)| batch)
}

/// Like [`tokenize_batch`], cutting each text to at most `max_tokens` tokens.
/// Also returns the indices of the texts that were cut.
pub fn tokenize_batch_truncated<S: AsRef<str>>(
    model: &EmbeddingModel,
    texts: &[S],
    max_tokens: Option<usize>,
) -> Result<(RaggedBatch, Vec<usize>), EmbedError> {
    if texts.is_empty() {
        return Err(EmbedError::EmptyBatch);
    }
    let mut ids = Vec::new();
    let mut offsets = Vec::with_capacity(texts.len() + 1);
    let mut truncated = Vec::new();
    offsets.push(0);
    for (k, text) in texts.iter().enumerate() {
        let start = ids.len();
        tokenize_into(model, text.as_ref(), &mut ids);
        if let Some(max) = max_tokens {
            if ids.len() - start > max {
                ids.truncate(start + max);
                truncated.push(k);
            }
        }
        offsets.push(ids.len());
    }
    Ok((RaggedBatch::from_parts_unchecked(ids, offsets), truncated))
}
