//! The request path shared by the HTTP service and the CLI: tokenize with
//! optional truncation, embed, encode.

use thiserror::Error;

use crate::embed::{embed_tokens, EmbedError, PooledEmbedding, PoolingConfig, RaggedBatch};
use crate::model_store::EmbeddingModel;
use crate::tokenizer::tokenize_batch_truncated;
use crate::wire::{self, WireError, WireFormat};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Tokenized request texts, plus the indices of texts cut at the token limit.
#[derive(Debug, Clone)]
pub struct PreparedBatch {
    pub batch: RaggedBatch,
    pub truncated: Vec<usize>,
}

impl PreparedBatch {
    pub fn token_count(&self) -> usize {
        self.batch.ids().len()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Pipeline<'a> {
    pub model: &'a EmbeddingModel,
    pub pooling: &'a PoolingConfig,
    pub max_tokens_per_text: Option<usize>,
}

impl<'a> Pipeline<'a> {
    pub fn new(model: &'a EmbeddingModel, pooling: &'a PoolingConfig) -> Self {
        Self { model, pooling, max_tokens_per_text: None }
    }

    pub fn with_max_tokens(mut self, max: usize) -> Self {
        self.max_tokens_per_text = Some(max);
        self
    }

    pub fn prepare<S: AsRef<str>>(&self, texts: &[S]) -> Result<PreparedBatch, EmbedError> {
        let (batch, truncated) = tokenize_batch_truncated(self.model, texts, self.max_tokens_per_text)?;
        Ok(PreparedBatch { batch, truncated })
    }

    pub fn embed_one(&self, ids: &[u32]) -> Result<PooledEmbedding, EmbedError> {
        embed_tokens(self.model, ids, self.pooling)
    }

    pub fn embed(&self, prepared: &PreparedBatch) -> Result<Vec<PooledEmbedding>, EmbedError> {
        crate::embed::embed_batch(self.model, &prepared.batch, self.pooling)
    }

    /// Encodes embeddings the way the service renders a full response body.
    pub fn encode(
        &self,
        prepared: &PreparedBatch,
        embeddings: &[PooledEmbedding],
        format: WireFormat,
    ) -> Result<Vec<u8>, WireError> {
        match format {
            WireFormat::Json => wire::encode_json(embeddings, &prepared.truncated),
            other => wire::encode(embeddings, other),
        }
    }

    /// Full response body for `texts` in `format`.
    pub fn render<S: AsRef<str>>(&self, texts: &[S], format: WireFormat) -> Result<Vec<u8>, PipelineError> {
        let prepared = self.prepare(texts)?;
        let embeddings = self.embed(&prepared)?;
        Ok(self.encode(&prepared, &embeddings, format)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::ZeroVectorPolicy;
    use crate::model_store::ModelManifest;

    fn toy() -> EmbeddingModel {
        EmbeddingModel::new(ModelManifest::new("toy", 1, 2, 0), vec!["hello".into()], vec![3.0, 4.0])
            .unwrap()
    }

    #[test]
    fn renders_each_format() {
        let m = toy();
        let cfg = PoolingConfig::uniform(ZeroVectorPolicy::ReturnZero);
        let p = Pipeline::new(&m, &cfg);
        assert_eq!(p.render(&["hello"], WireFormat::Jsonl).unwrap(), b"[0.600000024,0.800000012]\n");
        assert_eq!(
            p.render(&["hello"], WireFormat::Binary).unwrap(),
            [&[1, 0, 0, 0, 2, 0, 0, 0][..], &0.6f32.to_le_bytes(), &0.8f32.to_le_bytes()].concat()
        );
    }

    #[test]
    fn truncation_reported_in_json_only() {
        let m = toy();
        let cfg = PoolingConfig::uniform(ZeroVectorPolicy::ReturnZero);
        let p = Pipeline::new(&m, &cfg).with_max_tokens(1);
        let json = String::from_utf8(p.render(&["hello hello", "hello"], WireFormat::Json).unwrap()).unwrap();
        assert!(json.ends_with(r#""count":2,"truncated":[0]}"#), "{json}");
        let jsonl = p.render(&["hello hello"], WireFormat::Jsonl).unwrap();
        assert_eq!(jsonl, b"[0.600000024,0.800000012]\n");
    }

    #[test]
    fn empty_text_policy() {
        let m = toy();
        let strict = PoolingConfig::default();
        assert!(matches!(
            Pipeline::new(&m, &strict).render(&[""], WireFormat::Json),
            Err(PipelineError::Embed(EmbedError::EmptyInput))
        ));
        let lenient = PoolingConfig::uniform(ZeroVectorPolicy::ReturnZero);
        assert_eq!(Pipeline::new(&m, &lenient).render(&[""], WireFormat::Jsonl).unwrap(), b"[0.0,0.0]\n");
    }
}
