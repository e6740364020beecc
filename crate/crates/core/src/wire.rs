//! Response encodings: a JSON document, a raw little-endian `f32` envelope,
//! and newline-delimited JSON arrays.
//!
//! Binary envelope: `count: u32`, `dim: u32`, then `count * dim` IEEE754
//! single-precision values, row-major. Total length is `8 + count * dim * 4`.

use std::fmt;
use std::io::{self, Write};

use std::str::FromStr;

use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::PooledEmbedding;
use crate::model_store::extend_f32_le;

pub const BINARY_HEADER_LEN: usize = 8;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("shape error: {0}")]
    ShapeError(String),
    #[error("corrupt payload: {0}")]
    CorruptPayload(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WireFormat {
    #[default]
    Json,
    Binary,
    Jsonl,
}

impl WireFormat {
    pub const ALL: [WireFormat; 3] = [WireFormat::Json, WireFormat::Binary, WireFormat::Jsonl];

    pub fn as_str(self) -> &'static str {
        match self {
            WireFormat::Json => "json",
            WireFormat::Binary => "binary",
            WireFormat::Jsonl => "jsonl",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            WireFormat::Json => "application/json",
            WireFormat::Binary => "application/octet-stream",
            WireFormat::Jsonl => "application/x-ndjson",
        }
    }

    /// Maps a media type (parameters ignored) to a format.
    pub fn from_content_type(media: &str) -> Option<Self> {
        let essence = media.split(';').next().unwrap_or("").trim();
        Self::ALL.into_iter().find(|f| f.content_type().eq_ignore_ascii_case(essence))
    }
}

impl fmt::Display for WireFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WireFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(WireFormat::Json),
            "binary" | "bin" => Ok(WireFormat::Binary),
            "jsonl" | "ndjson" => Ok(WireFormat::Jsonl),
            other => Err(format!("unknown format {other:?} (use json|binary|jsonl)")),
        }
    }
}

fn common_dim(embeddings: &[PooledEmbedding]) -> Result<usize, WireError> {
    let dim = embeddings.first().map_or(0, PooledEmbedding::dim);
    if let Some((k, e)) = embeddings.iter().enumerate().find(|(_, e)| e.dim() != dim) {
        return Err(WireError::ShapeError(format!(
            "embedding {k} has dimension {}, expected {dim}",
            e.dim()
        )));
    }
    Ok(dim)
}

fn check_finite(embeddings: &[PooledEmbedding]) -> Result<(), WireError> {
    for (k, e) in embeddings.iter().enumerate() {
        if let Some(v) = e.values.iter().find(|v| !v.is_finite()) {
            return Err(WireError::ShapeError(format!("embedding {k} contains {v}")));
        }
    }
    Ok(())
}

pub fn encode(embeddings: &[PooledEmbedding], format: WireFormat) -> Result<Vec<u8>, WireError> {
    match format {
        WireFormat::Json => encode_json(embeddings, &[]),
        WireFormat::Binary => encode_binary(embeddings),
        WireFormat::Jsonl => encode_jsonl(embeddings),
    }
}

pub fn encode_binary(embeddings: &[PooledEmbedding]) -> Result<Vec<u8>, WireError> {
    let dim = common_dim(embeddings)?;
    let count = u32::try_from(embeddings.len())
        .map_err(|_| WireError::ShapeError("more than u32::MAX embeddings".into()))?;
    let mut out = Vec::with_capacity(BINARY_HEADER_LEN + embeddings.len() * dim * 4);
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for e in embeddings {
        extend_f32_le(&mut out, &e.values);
    }
    Ok(out)
}

struct Rows<'a>(&'a [PooledEmbedding]);

impl Serialize for Rows<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.0.len()))?;
        for e in self.0 {
            seq.serialize_element(e.values.as_slice())?;
        }
        seq.end()
    }
}

#[derive(Serialize)]
struct JsonBodyRef<'a> {
    embeddings: Rows<'a>,
    dim: usize,
    count: usize,
    #[serde(skip_serializing_if = "<[usize]>::is_empty")]
    truncated: &'a [usize],
}

/// `{"embeddings": [[...], ...], "dim": d, "count": B}`, plus a `truncated`
/// index list when non-empty.
pub fn encode_json(embeddings: &[PooledEmbedding], truncated: &[usize]) -> Result<Vec<u8>, WireError> {
    let dim = common_dim(embeddings)?;
    check_finite(embeddings)?;
    let body = JsonBodyRef { embeddings: Rows(embeddings), dim, count: embeddings.len(), truncated };
    let mut out = Vec::with_capacity(64 + embeddings.len() * dim * 12);
    serde_json::to_writer(&mut out, &body).map_err(io::Error::from)?;
    Ok(out)
}

/// Appends one JSONL line (`[v0,v1,...]\n`).
///
/// Values are written with nine significant digits, enough for every `f32`
/// to parse back to the identical value. This is cheaper than the shortest
/// representation used by the JSON document.
pub fn write_jsonl_line(values: &[f32], out: &mut Vec<u8>) {
    out.reserve(values.len() * 16 + 3);
    out.push(b'[');
    for (i, &v) in values.iter().enumerate() {
        if i > 0 {
            out.push(b',');
        }
        write_f32_9(v, out);
    }
    out.extend_from_slice(b"]\n");
}

const DIGIT_PAIRS: &[u8; 200] = b"\
    0001020304050607080910111213141516171819\
    2021222324252627282930313233343536373839\
    4041424344454647484950515253545556575859\
    6061626364656667686970717273747576777879\
    8081828384858687888990919293949596979899";

const POW10_MIN: i32 = -40;
const POW10_MAX: i32 = 60;

/// `10^k` for `k` in `POW10_MIN..=POW10_MAX`, covering every finite `f32`.
static POW10: [f64; (POW10_MAX - POW10_MIN + 1) as usize] = {
    let mut table = [0f64; (POW10_MAX - POW10_MIN + 1) as usize];
    let mut k = 0;
    while k < table.len() {
        let exp = k as i32 + POW10_MIN;
        let mut v = 1f64;
        let mut i = 0;
        while i < exp.unsigned_abs() {
            v *= 10.0;
            i += 1;
        }
        table[k] = if exp < 0 { 1.0 / v } else { v };
        k += 1;
    }
    table
};

/// Writes a finite `f32` as a JSON number with at most nine significant
/// digits, positional for decimal exponents in `-5..9`, scientific otherwise.
fn write_f32_9(v: f32, out: &mut Vec<u8>) {
    debug_assert!(v.is_finite());
    let mut buf = [b'0'; 32];
    let mut n = 0;
    if v.is_sign_negative() {
        buf[0] = b'-';
        n = 1;
    }
    let a = (v as f64).abs();
    if a == 0.0 {
        buf[n..n + 3].copy_from_slice(b"0.0");
        out.extend_from_slice(&buf[..n + 3]);
        return;
    }
    // decimal exponent estimate from the binary exponent, corrected by one step
    let e2 = ((a.to_bits() >> 52) & 0x7ff) as i32 - 1023;
    let mut e10 = (e2 as f64 * std::f64::consts::LOG10_2) as i32 - (e2 < 0) as i32;
    let mut m = a * POW10[(8 - e10 - POW10_MIN) as usize];
    if m >= 1e9 {
        e10 += 1;
        m /= 10.0;
    } else if m < 1e8 {
        e10 -= 1;
        m *= 10.0;
    }
    let mut mantissa = (m + 0.5) as u32;
    if mantissa >= 1_000_000_000 {
        mantissa = 100_000_000;
        e10 += 1;
    }
    let mut digits = [0u8; 9];
    let mut rest = mantissa;
    for i in (0..4).rev() {
        let pair = (rest % 100) as usize * 2;
        digits[1 + i * 2..3 + i * 2].copy_from_slice(&DIGIT_PAIRS[pair..pair + 2]);
        rest /= 100;
    }
    digits[0] = b'0' + rest as u8;
    let mut len = 9;
    while len > 1 && digits[len - 1] == b'0' {
        len -= 1;
    }
    let digits = &digits[..len];

    if (0..9).contains(&e10) {
        let int_len = e10 as usize + 1;
        if len <= int_len {
            buf[n..n + len].copy_from_slice(digits);
            // buf is pre-filled with '0' for the padding
            n += int_len;
            buf[n..n + 2].copy_from_slice(b".0");
            n += 2;
        } else {
            buf[n..n + int_len].copy_from_slice(&digits[..int_len]);
            n += int_len;
            buf[n] = b'.';
            n += 1;
            buf[n..n + len - int_len].copy_from_slice(&digits[int_len..]);
            n += len - int_len;
        }
    } else if (-5..0).contains(&e10) {
        buf[n + 1] = b'.';
        n += 2 + (-e10 - 1) as usize;
        buf[n..n + len].copy_from_slice(digits);
        n += len;
    } else {
        buf[n] = digits[0];
        n += 1;
        if len > 1 {
            buf[n] = b'.';
            buf[n + 1..n + len].copy_from_slice(&digits[1..]);
            n += len;
        }
        buf[n] = b'e';
        n += 1;
        if e10 < 0 {
            buf[n] = b'-';
            n += 1;
        }
        let e = e10.unsigned_abs();
        if e >= 10 {
            buf[n] = b'0' + (e / 10) as u8;
            n += 1;
        }
        buf[n] = b'0' + (e % 10) as u8;
        n += 1;
    }
    out.extend_from_slice(&buf[..n]);
}

pub fn encode_jsonl(embeddings: &[PooledEmbedding]) -> Result<Vec<u8>, WireError> {
    let dim = common_dim(embeddings)?;
    check_finite(embeddings)?;
    let mut out = Vec::with_capacity(embeddings.len() * (dim * 12 + 3));
    for e in embeddings {
        write_jsonl_line(&e.values, &mut out);
    }
    Ok(out)
}

/// Incremental JSONL encoder: every pushed embedding is written to the sink
/// as one complete line before the call returns.
pub struct JsonlWriter<W: Write> {
    sink: W,
    dim: Option<usize>,
    line: Vec<u8>,
}

impl<W: Write> JsonlWriter<W> {
    pub fn new(sink: W) -> Self {
        Self { sink, dim: None, line: Vec::new() }
    }

    pub fn push(&mut self, embedding: &PooledEmbedding) -> Result<(), WireError> {
        let dim = *self.dim.get_or_insert(embedding.dim());
        if embedding.dim() != dim {
            return Err(WireError::ShapeError(format!(
                "embedding has dimension {}, expected {dim}",
                embedding.dim()
            )));
        }
        check_finite(std::slice::from_ref(embedding))?;
        self.line.clear();
        write_jsonl_line(&embedding.values, &mut self.line);
        self.sink.write_all(&self.line)?;
        self.sink.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.sink
    }
}

pub fn decode_binary(bytes: &[u8]) -> Result<Vec<Vec<f32>>, WireError> {
    if bytes.len() < BINARY_HEADER_LEN {
        return Err(WireError::CorruptPayload(format!(
            "{} bytes is shorter than the {BINARY_HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    let count = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let payload = &bytes[BINARY_HEADER_LEN..];
    let expected = count.checked_mul(dim).and_then(|n| n.checked_mul(4));
    if expected != Some(payload.len()) {
        return Err(WireError::CorruptPayload(format!(
            "header declares {count}x{dim} values but payload has {} bytes",
            payload.len()
        )));
    }
    if dim == 0 {
        return Ok(vec![Vec::new(); count]);
    }
    Ok(payload
        .chunks_exact(dim * 4)
        .map(|row| {
            let mut v = vec![0f32; dim];
            crate::model_store::copy_f32_le(&mut v, row);
            v
        })
        .collect())
}

/// Parsed JSON response body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonEmbeddings {
    pub embeddings: Vec<Vec<f32>>,
    pub dim: usize,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub truncated: Vec<usize>,
}

pub fn decode_json(bytes: &[u8]) -> Result<JsonEmbeddings, WireError> {
    let body: JsonEmbeddings =
        serde_json::from_slice(bytes).map_err(|e| WireError::CorruptPayload(e.to_string()))?;
    if body.count != body.embeddings.len() {
        return Err(WireError::CorruptPayload(format!(
            "count {} but {} embeddings",
            body.count,
            body.embeddings.len()
        )));
    }
    if let Some(e) = body.embeddings.iter().find(|e| e.len() != body.dim) {
        return Err(WireError::CorruptPayload(format!(
            "embedding of length {} in a dim {} response",
            e.len(),
            body.dim
        )));
    }
    Ok(body)
}

pub fn decode_jsonl(bytes: &[u8]) -> Result<Vec<Vec<f32>>, WireError> {
    if bytes.is_empty() {
        return Ok(Vec::new());
    }
    if !bytes.ends_with(b"\n") {
        return Err(WireError::CorruptPayload("last line is not newline-terminated".into()));
    }
    bytes[..bytes.len() - 1]
        .split(|&b| b == b'\n')
        .enumerate()
        .map(|(k, line)| {
            serde_json::from_slice(line)
                .map_err(|e| WireError::CorruptPayload(format!("line {k}: {e}")))
        })
        .collect()
}

pub fn decode(bytes: &[u8], format: WireFormat) -> Result<Vec<Vec<f32>>, WireError> {
    match format {
        WireFormat::Json => decode_json(bytes).map(|b| b.embeddings),
        WireFormat::Binary => decode_binary(bytes),
        WireFormat::Jsonl => decode_jsonl(bytes),
    }
}
