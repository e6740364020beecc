//! The SEMB model file: vocabulary plus a row-major `f32` embedding matrix.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `SEMB`                            |
//! | 4      | 4    | format version (`1`)                    |
//! | 8      | 4    | vocab_size                              |
//! | 12     | 4    | dim                                     |
//! | 16     | 4    | unk_token_id                            |
//! | 20     | 1    | case folding flag (0/1)                 |
//! | 21     | 3    | zero padding                            |
//! | 24     | ..   | vocab_size × (u16 length, UTF-8 bytes)  |
//! | ..     | ..   | vocab_size × dim × f32                  |
//! | ..     | ..   | u32 length, UTF-8 JSON metadata         |
//!
//! The metadata trailer carries the model name, model version and default
//! pooling strategy.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::PoolingStrategy;

pub const MAGIC: [u8; 4] = *b"SEMB";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("duplicate token {token:?} at index {index}")]
    DuplicateToken { token: String, index: usize },
    #[error("shape error: {0}")]
    ShapeError(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("not a SEMB model file")]
    NotAModel,
    #[error("corrupt model: {0}")]
    CorruptModel(String),
    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    IndexError { id: u32, vocab_size: u32 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub name: String,
    pub version: u32,
    pub vocab_size: u32,
    pub dim: u32,
    pub case_folding: bool,
    pub unk_token_id: u32,
    pub pooling_default: PoolingStrategy,
}

impl ModelManifest {
    pub fn new(name: impl Into<String>, vocab_size: u32, dim: u32, unk_token_id: u32) -> Self {
        Self {
            name: name.into(),
            version: 1,
            vocab_size,
            dim,
            case_folding: false,
            unk_token_id,
            pooling_default: PoolingStrategy::Uniform,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.vocab_size == 0 || self.dim == 0 {
            return Err(ModelError::ShapeError(format!(
                "vocab_size and dim must be >= 1 (got {}x{})",
                self.vocab_size, self.dim
            )));
        }
        if self.unk_token_id >= self.vocab_size {
            return Err(ModelError::ShapeError(format!(
                "unk_token_id {} >= vocab_size {}",
                self.unk_token_id, self.vocab_size
            )));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    name: String,
    version: u32,
    pooling_default: PoolingStrategy,
}

/// Token strings in index order with a reverse lookup map.
#[derive(Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: FxHashMap<String, u32>,
    max_token_chars: usize,
}

impl Vocabulary {
    fn build(tokens: Vec<String>) -> Result<Self, ModelError> {
        let mut index = FxHashMap::with_capacity_and_hasher(tokens.len(), Default::default());
        let mut max_token_chars = 0;
        for (i, token) in tokens.iter().enumerate() {
            if token.is_empty() {
                return Err(ModelError::InvalidValue(format!("empty token at index {i}")));
            }
            if token.len() > u16::MAX as usize {
                return Err(ModelError::InvalidValue(format!(
                    "token at index {i} is {} bytes, limit is {}",
                    token.len(),
                    u16::MAX
                )));
            }
            if index.insert(token.clone(), i as u32).is_some() {
                return Err(ModelError::DuplicateToken { token: token.clone(), index: i });
            }
            max_token_chars = max_token_chars.max(token.chars().count());
        }
        Ok(Self { tokens, index, max_token_chars })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Length in characters of the longest token.
    pub fn max_token_chars(&self) -> usize {
        self.max_token_chars
    }
}

impl fmt::Debug for Vocabulary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Vocabulary")
            .field("len", &self.tokens.len())
            .field("max_token_chars", &self.max_token_chars)
            .finish()
    }
}

/// An immutable, validated model. Construct with [`EmbeddingModel::new`] or
/// [`load_model`].
#[derive(Clone)]
pub struct EmbeddingModel {
    manifest: ModelManifest,
    vocab: Vocabulary,
    matrix: Vec<f32>,
}

impl EmbeddingModel {
    pub fn new(
        manifest: ModelManifest,
        tokens: Vec<String>,
        matrix: Vec<f32>,
    ) -> Result<Self, ModelError> {
        manifest.validate()?;
        if tokens.len() != manifest.vocab_size as usize {
            return Err(ModelError::ShapeError(format!(
                "vocabulary has {} tokens, manifest says {}",
                tokens.len(),
                manifest.vocab_size
            )));
        }
        let expected = manifest.vocab_size as usize * manifest.dim as usize;
        if matrix.len() != expected {
            return Err(ModelError::ShapeError(format!(
                "matrix has {} elements, expected {}x{} = {}",
                matrix.len(),
                manifest.vocab_size,
                manifest.dim,
                expected
            )));
        }
        if let Some(pos) = matrix.iter().position(|v| !v.is_finite()) {
            let dim = manifest.dim as usize;
            return Err(ModelError::InvalidValue(format!(
                "non-finite value {} at row {} column {}",
                matrix[pos],
                pos / dim,
                pos % dim
            )));
        }
        let vocab = Vocabulary::build(tokens)?;
        Ok(Self { manifest, vocab, matrix })
    }

    pub fn manifest(&self) -> &ModelManifest {
        &self.manifest
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    /// The full matrix, row-major.
    pub fn matrix(&self) -> &[f32] {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.manifest.dim as usize
    }

    pub fn vocab_size(&self) -> usize {
        self.manifest.vocab_size as usize
    }

    pub fn lookup_row(&self, id: u32) -> Result<&[f32], ModelError> {
        if id >= self.manifest.vocab_size {
            return Err(ModelError::IndexError { id, vocab_size: self.manifest.vocab_size });
        }
        Ok(self.row(id))
    }

    /// Row `id` without the range check error path. Panics on out-of-range ids.
    #[inline]
    pub(crate) fn row(&self, id: u32) -> &[f32] {
        let dim = self.dim();
        let start = id as usize * dim;
        &self.matrix[start..start + dim]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        write_parts(&self.manifest, self.vocab.tokens(), &self.matrix)
    }
}

/// Bit-exact equality: matrices compare by bit pattern, so `-0.0 != 0.0`.
impl PartialEq for EmbeddingModel {
    fn eq(&self, other: &Self) -> bool {
        self.manifest == other.manifest
            && self.vocab.tokens == other.vocab.tokens
            && self.matrix.len() == other.matrix.len()
            && self.matrix.iter().zip(&other.matrix).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl fmt::Debug for EmbeddingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EmbeddingModel")
            .field("manifest", &self.manifest)
            .field("vocab", &self.vocab)
            .finish_non_exhaustive()
    }
}

/// Serializes a model into the SEMB format after validating every invariant.
pub fn pack_model<S: AsRef<str>>(
    vocab: &[S],
    matrix: &[f32],
    manifest: &ModelManifest,
) -> Result<Vec<u8>, ModelError> {
    let tokens: Vec<String> = vocab.iter().map(|t| t.as_ref().to_owned()).collect();
    let model = EmbeddingModel::new(manifest.clone(), tokens, matrix.to_vec())?;
    Ok(model.to_bytes())
}

fn metadata_json(manifest: &ModelManifest) -> Vec<u8> {
    serde_json::to_vec(&Metadata {
        name: manifest.name.clone(),
        version: manifest.version,
        pooling_default: manifest.pooling_default,
    })
    .expect("metadata serializes")
}

/// Exact file length for a model with the given manifest and tokens.
pub fn encoded_len<S: AsRef<str>>(manifest: &ModelManifest, vocab: &[S]) -> usize {
    let vocab_bytes: usize = vocab.iter().map(|t| 2 + t.as_ref().len()).sum();
    HEADER_LEN
        + vocab_bytes
        + manifest.vocab_size as usize * manifest.dim as usize * 4
        + 4
        + metadata_json(manifest).len()
}

fn write_parts(manifest: &ModelManifest, tokens: &[String], matrix: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(encoded_len(manifest, tokens));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&manifest.vocab_size.to_le_bytes());
    out.extend_from_slice(&manifest.dim.to_le_bytes());
    out.extend_from_slice(&manifest.unk_token_id.to_le_bytes());
    out.push(manifest.case_folding as u8);
    out.extend_from_slice(&[0, 0, 0]);
    for token in tokens {
        out.extend_from_slice(&(token.len() as u16).to_le_bytes());
        out.extend_from_slice(token.as_bytes());
    }
    extend_f32_le(&mut out, matrix);
    let meta = metadata_json(manifest);
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    out
}

#[cfg(target_endian = "little")]
pub(crate) fn extend_f32_le(out: &mut Vec<u8>, values: &[f32]) {
    out.extend_from_slice(bytemuck::cast_slice(values));
}

#[cfg(target_endian = "big")]
pub(crate) fn extend_f32_le(out: &mut Vec<u8>, values: &[f32]) {
    out.reserve(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Copies little-endian `f32` bytes into `dst`. On little-endian targets this
/// is a single memcpy.
pub(crate) fn copy_f32_le(dst: &mut [f32], src: &[u8]) {
    debug_assert_eq!(dst.len() * 4, src.len());
    #[cfg(target_endian = "little")]
    bytemuck::cast_slice_mut::<f32, u8>(dst).copy_from_slice(src);
    #[cfg(target_endian = "big")]
    for (d, chunk) in dst.iter_mut().zip(src.chunks_exact(4)) {
        *d = f32::from_le_bytes(chunk.try_into().unwrap());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            ModelError::CorruptModel(format!(
                "truncated {what}: need {n} bytes at offset {}, file has {}",
                self.pos,
                self.buf.len()
            ))
        })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u16(&mut self, what: &str) -> Result<u16, ModelError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }
}

/// Parses a SEMB byte stream. The matrix block is copied out verbatim; no
/// per-element conversion happens on little-endian hosts.
pub fn load_model(bytes: &[u8]) -> Result<EmbeddingModel, ModelError> {
    if bytes.len() < MAGIC.len() {
        return if MAGIC.starts_with(bytes) {
            Err(ModelError::CorruptModel(format!("file is only {} bytes", bytes.len())))
        } else {
            Err(ModelError::NotAModel)
        };
    }
    if bytes[..4] != MAGIC {
        return Err(ModelError::NotAModel);
    }
    let mut r = Reader { buf: bytes, pos: 4 };
    let version = r.u32("header")?;
    if version != FORMAT_VERSION {
        return Err(ModelError::CorruptModel(format!("unsupported format version {version}")));
    }
    let vocab_size = r.u32("header")?;
    let dim = r.u32("header")?;
    let unk_token_id = r.u32("header")?;
    let flags = r.take(4, "header")?;
    let case_folding = match flags[0] {
        0 => false,
        1 => true,
        other => return Err(ModelError::CorruptModel(format!("case folding flag is {other}"))),
    };
    if flags[1..] != [0, 0, 0] {
        return Err(ModelError::CorruptModel("non-zero header padding".into()));
    }
    if vocab_size == 0 || dim == 0 {
        return Err(ModelError::CorruptModel(format!("empty shape {vocab_size}x{dim}")));
    }

    // Each vocabulary entry takes at least 3 bytes; reject absurd counts before allocating.
    if (vocab_size as usize).saturating_mul(3) > bytes.len() - r.pos {
        return Err(ModelError::CorruptModel(format!(
            "vocabulary of {vocab_size} entries cannot fit in remaining {} bytes",
            bytes.len() - r.pos
        )));
    }
    let mut tokens = Vec::with_capacity(vocab_size as usize);
    for i in 0..vocab_size {
        let len = r.u16("vocabulary")? as usize;
        let raw = r.take(len, "vocabulary")?;
        let token = std::str::from_utf8(raw)
            .map_err(|e| ModelError::CorruptModel(format!("token {i} is not UTF-8: {e}")))?;
        tokens.push(token.to_owned());
    }

    let elements = (vocab_size as usize)
        .checked_mul(dim as usize)
        .filter(|n| n.checked_mul(4).is_some())
        .ok_or_else(|| ModelError::CorruptModel("matrix size overflows".into()))?;
    let raw = r.take(elements * 4, "matrix")?;
    let mut matrix = vec![0f32; elements];
    copy_f32_le(&mut matrix, raw);

    let meta_len = r.u32("metadata")? as usize;
    let meta: Metadata = serde_json::from_slice(r.take(meta_len, "metadata")?)
        .map_err(|e| ModelError::CorruptModel(format!("metadata: {e}")))?;
    if r.pos != bytes.len() {
        return Err(ModelError::CorruptModel(format!(
            "{} trailing bytes after metadata",
            bytes.len() - r.pos
        )));
    }

    let manifest = ModelManifest {
        name: meta.name,
        version: meta.version,
        vocab_size,
        dim,
        case_folding,
        unk_token_id,
        pooling_default: meta.pooling_default,
    };
    EmbeddingModel::new(manifest, tokens, matrix).map_err(|e| match e {
        ModelError::CorruptModel(_) => e,
        other => ModelError::CorruptModel(other.to_string()),
    })
}

pub fn load_model_file(path: impl AsRef<Path>) -> Result<EmbeddingModel, ModelError> {
    load_model(&fs::read(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RowNormStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

/// Min, max and mean Euclidean norm over the rows of the matrix.
pub fn row_norm_stats(model: &EmbeddingModel) -> RowNormStats {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for row in model.matrix.chunks_exact(model.dim()) {
        let norm = row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
        min = min.min(norm);
        max = max.max(norm);
        sum += norm;
    }
    RowNormStats { min, max, mean: sum / model.vocab_size() as f64 }
}
