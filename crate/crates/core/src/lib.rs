//! Static token-lookup text embeddings.
//!
//! A text is tokenized against a fixed vocabulary, each token id selects one
//! row of a precomputed embedding matrix, the rows are mean pooled (optionally
//! weighted per token id) and the result is scaled to unit length.
//!
//! ```
//! use staticembed_core::{embed_text, EmbeddingModel, ModelManifest, PoolingConfig};
//!
//! let manifest = ModelManifest::new("toy", 1, 2, 0);
//! let model = EmbeddingModel::new(manifest, vec!["hello".into()], vec![3.0, 4.0]).unwrap();
//! let e = embed_text(&model, "hello", &PoolingConfig::default()).unwrap();
//! assert_eq!(e.values, [0.6, 0.8]);
//! ```

pub mod embed;
pub mod eval;
pub mod model_store;
pub mod pipeline;
pub mod synth;
pub mod tokenizer;
pub mod wire;

pub use embed::{
    cosine_similarity, embed_batch, embed_text, embed_tokens, normalize, pool, EmbedError,
    EmbeddingRows, PooledEmbedding, PoolingConfig, PoolingStrategy, RaggedBatch, ZeroVectorPolicy,
};
pub use model_store::{
    load_model, load_model_file, pack_model, EmbeddingModel, ModelError, ModelManifest, Vocabulary,
};
pub use pipeline::{Pipeline, PipelineError, PreparedBatch};
pub use tokenizer::{tokenize, tokenize_batch, TokenSequence};
pub use wire::{decode, decode_binary, encode, WireError, WireFormat};
