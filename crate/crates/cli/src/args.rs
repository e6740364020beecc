use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use staticembed_core::{WireFormat, ZeroVectorPolicy};

/// Static token-lookup text embeddings.
///
/// Exit codes: 0 success, 1 usage or input error, 2 network or bind error,
/// 3 model error.
#[derive(Debug, Parser)]
#[command(name = "staticembed", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP embedding service until interrupted.
    Serve(ServeArgs),
    /// Embed texts from arguments or standard input and write the encoded result.
    Embed(EmbedArgs),
    /// Load-test a running service.
    Bench(BenchArgs),
    /// Evaluate a model on similarity, duplicate and length-scaling tasks.
    Eval(EvalArgs),
    /// Build a model file from a vocabulary and matrix, or a random one.
    ModelPack(PackArgs),
    /// Print a model's manifest, vocabulary preview and row-norm statistics.
    ModelInspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct PoolingArgs {
    /// Behaviour for inputs whose pooled vector cannot be normalized.
    #[arg(long, value_name = "error|return_zero")]
    pub policy: Option<ZeroVectorPolicy>,
    /// Per-token-id pooling weights: whitespace-separated text (.txt) or raw little-endian f32.
    #[arg(long, value_name = "FILE")]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// key=value config file; flags and STATICEMBED_* variables take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "HOST:PORT")]
    pub bind: Option<String>,
    #[arg(long)]
    pub max_batch_size: Option<usize>,
    #[arg(long)]
    pub max_tokens_per_text: Option<usize>,
    #[arg(long)]
    pub max_concurrent_requests: Option<usize>,
    #[arg(long)]
    pub worker_threads: Option<usize>,
    #[arg(long, value_name = "json|binary|jsonl")]
    pub default_format: Option<WireFormat>,
    #[arg(long, value_name = "error|return_zero")]
    pub zero_vector_policy: Option<ZeroVectorPolicy>,
    /// Pause every embed request this long after admission (diagnostics).
    #[arg(long, value_name = "MS")]
    pub handler_delay_ms: Option<u64>,
    #[arg(long)]
    pub max_body_bytes: Option<usize>,
    /// Per-token-id pooling weights (see `embed --weights`).
    #[arg(long, value_name = "FILE")]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Embed locally with this model file.
    #[arg(long, value_name = "FILE", required_unless_present = "target", conflicts_with = "target")]
    pub model: Option<PathBuf>,
    /// Send the texts to a running service instead.
    #[arg(long, value_name = "URL")]
    pub target: Option<String>,
    #[arg(long, default_value = "json", value_name = "json|binary|jsonl")]
    pub format: WireFormat,
    /// Read standard input as one JSON array of strings instead of lines.
    #[arg(long)]
    pub json_array: bool,
    /// Token limit per text, as in the service.
    #[arg(long, value_name = "N")]
    pub max_tokens_per_text: Option<usize>,
    #[command(flatten)]
    pub pooling: PoolingArgs,
    /// Texts to embed; standard input is read when none are given.
    pub texts: Vec<String>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_name = "URL")]
    pub target: String,
    /// Scenario JSON file or preset name (single, batch-10, batch-100, batch-variable, jsonl, ladder).
    #[arg(long, default_value = "single", value_name = "FILE|PRESET")]
    pub scenario: String,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub connections: Option<usize>,
    /// Seconds, e.g. `30s` or `30`.
    #[arg(long, value_parser = parse_seconds)]
    pub duration: Option<f64>,
    #[arg(long, value_name = "json|binary|jsonl")]
    pub format: Option<WireFormat>,
    /// Write the reports here as a JSON array.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Pause between scenarios, in seconds.
    #[arg(long, default_value = "2", value_parser = parse_seconds)]
    pub cooldown: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// JSON list of {"a","b","gold"} objects, or `builtin`. Repeatable.
    #[arg(long = "dataset", value_name = "FILE|builtin", default_value = "builtin")]
    pub datasets: Vec<String>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Generated texts per length bucket.
    #[arg(long, default_value_t = 1000)]
    pub texts_per_bucket: usize,
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
    #[command(flatten)]
    pub pooling: PoolingArgs,
}

#[derive(Debug, Args)]
pub struct PackArgs {
    /// One token per line.
    #[arg(long, value_name = "FILE", required_unless_present = "random", requires = "matrix")]
    pub vocab: Option<PathBuf>,
    /// Row-major matrix: whitespace-separated text (.txt) or raw little-endian f32.
    #[arg(long, value_name = "FILE")]
    pub matrix: Option<PathBuf>,
    /// Synthetic model of the given shape.
    #[arg(long, value_name = "V:D", conflicts_with_all = ["vocab", "matrix"], value_parser = parse_shape)]
    pub random: Option<(usize, usize)>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub version: u32,
    /// Lowercase input text before tokenizing.
    #[arg(long)]
    pub case_folding: bool,
    /// Unknown-token id; defaults to the id of `[UNK]` if present, else 0.
    #[arg(long, value_name = "ID")]
    pub unk_id: Option<u32>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub model: PathBuf,
    /// Number of vocabulary entries to show.
    #[arg(long, default_value_t = 10)]
    pub preview: usize,
}

fn parse_seconds(s: &str) -> Result<f64, String> {
    let n = s.strip_suffix('s').unwrap_or(s);
    match n.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        _ => Err(format!("expected seconds like 10s, got {s:?}")),
    }
}

fn parse_shape(s: &str) -> Result<(usize, usize), String> {
    let bad = || format!("expected V:D, got {s:?}");
    let (v, d) = s.split_once(':').ok_or_else(bad)?;
    Ok((v.parse().map_err(|_| bad())?, d.parse().map_err(|_| bad())?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn value_parsers() {
        assert_eq!(parse_seconds("10s"), Ok(10.0));
        assert_eq!(parse_seconds("2.5"), Ok(2.5));
        assert!(parse_seconds("fast").is_err());
        assert_eq!(parse_shape("30000:384"), Ok((30000, 384)));
        assert!(parse_shape("30000x384").is_err());
    }
}
