use std::time::Duration;

use bytes::Bytes;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use staticembed_core::WireFormat;

use crate::BenchError;

/// Distinct request bodies prepared per scenario; connections cycle them.
const BODY_POOL: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Single,
    BatchFixed,
    BatchVariable,
    JsonlStream,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size_range: Option<[usize; 2]>,
    #[serde(default = "default_connections")]
    pub connections: usize,
    #[serde(default = "default_threads")]
    pub threads: usize,
    /// Seconds.
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default)]
    pub format: WireFormat,
    #[serde(default = "builtin_corpus")]
    pub text_corpus: Vec<String>,
}

fn default_connections() -> usize {
    400
}

fn default_threads() -> usize {
    12
}

fn default_duration() -> f64 {
    30.0
}

impl Scenario {
    pub fn new(name: impl Into<String>, kind: ScenarioKind) -> Self {
        Self {
            name: name.into(),
            kind,
            batch_size: None,
            batch_size_range: None,
            connections: default_connections(),
            threads: default_threads(),
            duration: default_duration(),
            format: WireFormat::Json,
            text_corpus: builtin_corpus(),
        }
    }

    pub fn from_json(json: &str) -> Result<Self, BenchError> {
        let s: Self = serde_json::from_str(json).map_err(|e| BenchError::Config(format!("bad scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let fail = |m: String| Err(BenchError::Config(format!("scenario {:?}: {m}", self.name)));
        if !(self.duration >= 1.0 && self.duration.is_finite()) {
            return fail(format!("duration must be >= 1 s, got {}", self.duration));
        }
        if self.threads == 0 || self.connections < self.threads {
            return fail(format!(
                "need connections >= threads >= 1, got {} connections, {} threads",
                self.connections, self.threads
            ));
        }
        if self.text_corpus.is_empty() {
            return fail("text_corpus is empty".into());
        }
        match self.kind {
            ScenarioKind::BatchFixed if self.batch_size.is_none() => return fail("batch_fixed needs batch_size".into()),
            ScenarioKind::BatchVariable => match self.batch_size_range {
                None => return fail("batch_variable needs batch_size_range".into()),
                Some([lo, hi]) if lo == 0 || lo > hi => return fail(format!("bad batch_size_range [{lo}, {hi}]")),
                Some(_) => {}
            },
            _ => {}
        }
        if self.batch_size == Some(0) {
            return fail("batch_size must be >= 1".into());
        }
        Ok(())
    }

    pub fn duration(&self) -> Duration {
        Duration::from_secs_f64(self.duration)
    }

    /// The format actually requested; streaming scenarios always ask for JSONL.
    pub fn effective_format(&self) -> WireFormat {
        match self.kind {
            ScenarioKind::JsonlStream => WireFormat::Jsonl,
            _ => self.format,
        }
    }

    /// Texts per request, or the midpoint for variable batches.
    pub fn nominal_batch_size(&self) -> f64 {
        match (self.kind, self.batch_size_range) {
            (ScenarioKind::Single, _) => 1.0,
            (ScenarioKind::BatchVariable, Some([lo, hi])) => (lo + hi) as f64 / 2.0,
            _ => self.batch_size.unwrap_or(JSONL_DEFAULT_BATCH) as f64,
        }
    }

    /// Request bodies with their text counts. Texts are taken from the
    /// corpus round-robin.
    pub(crate) fn request_bodies(&self) -> Vec<(Bytes, usize)> {
        let mut rng = StdRng::seed_from_u64(0x5eed);
        let corpus = &self.text_corpus;
        let mut cursor = 0;
        let fixed = match self.kind {
            ScenarioKind::Single => Some(1),
            ScenarioKind::BatchFixed => self.batch_size,
            ScenarioKind::JsonlStream => Some(self.batch_size.unwrap_or(JSONL_DEFAULT_BATCH)),
            ScenarioKind::BatchVariable => None,
        };
        // a fixed batch cycles the corpus with period len / gcd(len, batch)
        let distinct = match fixed {
            Some(b) => corpus.len() / gcd(corpus.len(), b),
            None => BODY_POOL,
        };
        (0..distinct.min(BODY_POOL))
            .map(|_| {
                let size = fixed.unwrap_or_else(|| {
                    let [lo, hi] = self.batch_size_range.expect("validated");
                    rng.random_range(lo..=hi)
                });
                let texts: Vec<&str> = (0..size)
                    .map(|_| {
                        let t = corpus[cursor % corpus.len()].as_str();
                        cursor += 1;
                        t
                    })
                    .collect();
                (staticembed_client::embed_body(&texts), size)
            })
            .collect()
    }
}

const JSONL_DEFAULT_BATCH: usize = 100;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

pub const PRESETS: &[&str] = &["single", "batch-10", "batch-100", "batch-variable", "jsonl", "ladder"];

/// Built-in scenarios by name. `ladder` expands to single, batch-10, batch-100.
pub fn preset(name: &str) -> Option<Vec<Scenario>> {
    let one = |kind, batch: Option<usize>| {
        let mut s = Scenario::new(name, kind);
        s.batch_size = batch;
        s
    };
    Some(match name {
        "single" => vec![one(ScenarioKind::Single, None)],
        "batch-10" => vec![one(ScenarioKind::BatchFixed, Some(10))],
        "batch-100" => vec![one(ScenarioKind::BatchFixed, Some(100))],
        "batch-variable" => {
            let mut s = one(ScenarioKind::BatchVariable, None);
            s.batch_size_range = Some([1, 100]);
            vec![s]
        }
        "jsonl" => vec![one(ScenarioKind::JsonlStream, Some(100))],
        "ladder" => ["single", "batch-10", "batch-100"].iter().flat_map(|n| preset(n).unwrap()).collect(),
        _ => return None,
    })
}

const CORPUS: &[&str] = &[
    "the quick brown fox jumps over the lazy dog",
    "static token lookup makes text embedding fast",
    "search query latency matters for every request",
    "the city council met during the early years of the war",
    "she was born in the north and later moved to the south",
    "national team season results were known after the first match",
    "the university film school made three new films this year",
    "one model serves many people through a single server",
    "hello world",
    "vector search over embedding tables",
    "the album was first released in the united states",
    "history of the american family in the second half of the century",
    "two teams played in the national season before the war",
    "a fast server answers each request with low latency",
    "the embedding of a text is the mean of its token vectors",
    "people who were known for their early work",
    "the state and the city were united under one national government",
    "after the war the school became part of the university",
    "many of the people in the area were born there",
    "text in and vector out",
    "the lazy dog slept while the fox ran through the city",
    "this query has only a few words",
    "most of the team had been there for years",
    "the first film made by the new school was known across the world",
    "between the north and the south there is a high mountain area",
    "some of the later years were used for history research",
    "token",
    "the model was made to be fast and small",
    "states with many schools and universities",
    "the request was sent to the server and the response came back quickly",
    "her family moved to the city in the early years",
    "the server uses static tokens for lookup",
    "quick search over three national film archives",
    "there were two other teams in the area",
    "while the season was over the team still played",
    "embedding vectors for search and duplicate detection",
    "the world is more than one city",
    "during the first years the school had only one team",
    "the lookup table has one vector per token",
    "brown dog and brown fox",
];

pub fn builtin_corpus() -> Vec<String> {
    CORPUS.iter().map(|s| s.to_string()).collect()
}
