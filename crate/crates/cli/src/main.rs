mod args;

use std::io::{self, Read, Write};
use std::path::Path;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use staticembed_bench::{preset, render_report, run_suite, BenchError, Scenario};
use staticembed_client::{Client, ClientError, Target};
use staticembed_core::eval::{builtin_datasets, parse_dataset, run_eval, EvalError, EvalOptions, EvalReport};
use staticembed_core::model_store::{load_model_file, row_norm_stats, ModelError};
use staticembed_core::synth::{random_model, UNK_TOKEN};
use staticembed_core::{EmbeddingModel, ModelManifest, Pipeline, PoolingConfig, ZeroVectorPolicy};
use staticembed_server::{AppState, ConfigOverrides, LoadedModel, ServiceConfig, SHUTDOWN_GRACE};
use thiserror::Error;

use args::{BenchArgs, Cli, Command, EmbedArgs, EvalArgs, InspectArgs, PackArgs, PoolingArgs, ServeArgs};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Network(String),
    #[error("{0}")]
    Model(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Network(_) => 2,
            CliError::Model(_) => 3,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Model(e.to_string())
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Serve(a) => serve(a),
        Command::Embed(a) => embed(a),
        Command::Bench(a) => bench(a),
        Command::Eval(a) => eval(a),
        Command::ModelPack(a) => model_pack(a),
        Command::ModelInspect(a) => model_inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("staticembed: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

/// Whitespace-separated numbers for `.txt` files, raw little-endian f32 otherwise.
fn read_f32_file(path: &Path) -> Result<Vec<f32>, CliError> {
    let bytes = read_file(path)?;
    if path.extension().is_some_and(|e| e == "txt") {
        let text = String::from_utf8(bytes).map_err(|_| usage(format!("{} is not UTF-8", path.display())))?;
        return text
            .split_whitespace()
            .map(|t| t.parse::<f32>().map_err(|_| usage(format!("{}: bad number {t:?}", path.display()))))
            .collect();
    }
    if bytes.len() % 4 != 0 {
        return Err(usage(format!("{}: length {} is not a multiple of 4", path.display(), bytes.len())));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
}

fn load(path: &Path) -> Result<EmbeddingModel, CliError> {
    load_model_file(path).map_err(|e| CliError::Model(format!("{}: {e}", path.display())))
}

fn pooling(args: &PoolingArgs, default_policy: ZeroVectorPolicy, vocab_size: usize) -> Result<PoolingConfig, CliError> {
    let policy = args.policy.unwrap_or(default_policy);
    pooling_from(args.weights.as_deref(), policy, vocab_size)
}

fn pooling_from(weights: Option<&Path>, policy: ZeroVectorPolicy, vocab_size: usize) -> Result<PoolingConfig, CliError> {
    let cfg = match weights {
        None => PoolingConfig::uniform(policy),
        Some(path) => PoolingConfig::weighted(read_f32_file(path)?, policy).map_err(usage)?,
    };
    cfg.check_vocab(vocab_size).map_err(usage)?;
    Ok(cfg)
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(path) => {
            let text = String::from_utf8(read_file(path)?).map_err(|_| usage("config file is not UTF-8"))?;
            ConfigOverrides::from_file_contents(&text, &path.display().to_string()).map_err(usage)?
        }
        None => ConfigOverrides::default(),
    };
    let env = ConfigOverrides::from_env(std::env::vars()).map_err(usage)?;
    let flags = ConfigOverrides {
        bind: args.bind,
        max_batch_size: args.max_batch_size,
        max_tokens_per_text: args.max_tokens_per_text,
        max_concurrent_requests: args.max_concurrent_requests,
        worker_threads: args.worker_threads,
        default_format: args.default_format,
        zero_vector_policy: args.zero_vector_policy,
        handler_delay_ms: args.handler_delay_ms,
        max_body_bytes: args.max_body_bytes,
    };
    let config = ServiceConfig::resolve(flags, env, file).map_err(usage)?;
    let _ = tracing_subscriber::fmt()
        .with_writer(io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("STATICEMBED_LOG")
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .try_init();

    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(config.worker_threads)
        .enable_all()
        .build()
        .map_err(|e| usage(format!("cannot start runtime: {e}")))?;
    let result = rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&config.bind_address)
            .await
            .map_err(|e| CliError::Network(format!("cannot bind {}: {e}", config.bind_address)))?;
        let addr = listener.local_addr().map_err(|e| CliError::Network(e.to_string()))?;
        let policy = config.zero_vector_policy;
        let state = AppState::new(config).map_err(usage)?;
        eprintln!("staticembed: listening on http://{addr}");
        let server = tokio::spawn(staticembed_server::run(listener, state.clone(), shutdown_signal(), SHUTDOWN_GRACE));

        let path = args.model.clone();
        let model = tokio::task::spawn_blocking(move || load(&path))
            .await
            .map_err(|e| CliError::Model(e.to_string()))??;
        let pooling = pooling_from(args.weights.as_deref(), policy, model.vocab_size())?;
        let (name, v, d) = (model.manifest().name.clone(), model.vocab_size(), model.dim());
        state.set_model(LoadedModel::new(model, pooling).map_err(usage)?);
        eprintln!("staticembed: model {name} loaded ({v} x {d}), ready");

        server
            .await
            .map_err(|e| CliError::Network(e.to_string()))?
            .map_err(|e| CliError::Network(format!("server error: {e}")))?;
        eprintln!("staticembed: stopped");
        Ok(())
    });
    rt.shutdown_timeout(Duration::from_secs(1));
    result
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut term = signal(SignalKind::terminate()).expect("install SIGTERM handler");
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    let _ = tokio::signal::ctrl_c().await;
    eprintln!("staticembed: shutting down, draining in-flight requests");
}

fn read_texts(args: &EmbedArgs) -> Result<Vec<String>, CliError> {
    if !args.texts.is_empty() {
        return Ok(args.texts.clone());
    }
    let mut input = Vec::new();
    io::stdin().read_to_end(&mut input).map_err(|e| usage(format!("cannot read standard input: {e}")))?;
    if args.json_array {
        return serde_json::from_slice(&input).map_err(|e| usage(format!("standard input is not a JSON array of strings: {e}")));
    }
    let text = String::from_utf8(input).map_err(|_| usage("standard input is not UTF-8"))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn embed(args: EmbedArgs) -> Result<(), CliError> {
    let texts = read_texts(&args)?;
    if texts.is_empty() {
        return Err(usage("no input texts"));
    }
    let defaults = ServiceConfig::default();
    let body = match (&args.model, &args.target) {
        (Some(path), _) => {
            let model = load(path)?;
            let pooling = pooling(&args.pooling, defaults.zero_vector_policy, model.vocab_size())?;
            let max_tokens = args.max_tokens_per_text.unwrap_or(defaults.max_tokens_per_text);
            if max_tokens == 0 {
                return Err(usage("--max-tokens-per-text must be >= 1"));
            }
            Pipeline::new(&model, &pooling)
                .with_max_tokens(max_tokens)
                .render(&texts, args.format)
                .map_err(usage)?
        }
        (None, Some(url)) => {
            if args.pooling.policy.is_some() || args.pooling.weights.is_some() || args.max_tokens_per_text.is_some() {
                return Err(usage("pooling and truncation options are set by the service when --target is used"));
            }
            let target: Target = url.parse().map_err(usage)?;
            let rt = tokio::runtime::Builder::new_current_thread()
                .enable_all()
                .build()
                .map_err(|e| usage(e.to_string()))?;
            let response = rt.block_on(async { Client::new(target).embed_raw(&texts, args.format).await });
            match response {
                Ok(r) => r.body.to_vec(),
                Err(e @ (ClientError::Connect { .. } | ClientError::Http(_))) => return Err(CliError::Network(e.to_string())),
                Err(e) => return Err(usage(e)),
            }
        }
        (None, None) => return Err(usage("one of --model or --target is required")),
    };
    let mut out = io::stdout().lock();
    out.write_all(&body).and_then(|_| out.flush()).map_err(|e| usage(format!("cannot write output: {e}")))
}

fn scenarios_for(args: &BenchArgs) -> Result<Vec<Scenario>, CliError> {
    let path = Path::new(&args.scenario);
    let mut scenarios = if path.is_file() {
        let text = String::from_utf8(read_file(path)?).map_err(|_| usage("scenario file is not UTF-8"))?;
        // a file holds one scenario or a list of them
        match serde_json::from_str::<Vec<Scenario>>(&text) {
            Ok(list) => list,
            Err(_) => vec![Scenario::from_json(&text).map_err(usage)?],
        }
    } else {
        preset(&args.scenario).ok_or_else(|| {
            usage(format!(
                "{:?} is neither a scenario file nor a preset ({})",
                args.scenario,
                staticembed_bench::PRESETS.join(", ")
            ))
        })?
    };
    for s in &mut scenarios {
        if let Some(t) = args.threads {
            s.threads = t;
        }
        if let Some(c) = args.connections {
            s.connections = c;
        }
        if let Some(d) = args.duration {
            s.duration = d;
        }
        if let Some(f) = args.format {
            s.format = f;
        }
        s.validate().map_err(usage)?;
    }
    Ok(scenarios)
}

fn bench(args: BenchArgs) -> Result<(), CliError> {
    let target: Target = args.target.parse().map_err(usage)?;
    let scenarios = scenarios_for(&args)?;
    let bench_err = |e: BenchError| match e {
        BenchError::Connect { .. } => CliError::Network(e.to_string()),
        other => usage(other),
    };
    let suite = run_suite(&target, &scenarios, Duration::from_secs_f64(args.cooldown)).map_err(bench_err)?;
    let table = render_report(&suite.reports, args.out.as_deref()).map_err(bench_err)?;
    print!("{table}");
    for w in &suite.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), CliError> {
    let model = load(&args.model)?;
    let cfg = pooling(&args.pooling, ZeroVectorPolicy::ReturnZero, model.vocab_size())?;
    let data_err = |e: EvalError| usage(e);
    let mut datasets = Vec::new();
    for spec in &args.datasets {
        if spec == "builtin" {
            datasets.extend(builtin_datasets(&model, args.seed).map_err(data_err)?);
        } else {
            let path = Path::new(spec);
            let name = path.file_stem().map_or(spec.clone(), |s| s.to_string_lossy().into_owned());
            datasets.push(parse_dataset(&name, &read_file(path)?, None).map_err(data_err)?);
        }
    }
    let opts = EvalOptions { texts_per_bucket: args.texts_per_bucket, seed: args.seed };
    let report = run_eval(&model, &datasets, &cfg, &opts).map_err(data_err)?;
    print!("{}", render_eval(&report));
    if let Some(out) = &args.out {
        let json = serde_json::to_vec_pretty(&report).expect("report serializes");
        std::fs::write(out, json).map_err(|e| usage(format!("cannot write {}: {e}", out.display())))?;
    }
    Ok(())
}

fn render_eval(report: &EvalReport) -> String {
    let mut out = String::new();
    let fmt_opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    out += &format!("spearman: {}\nduplicate_ap: {}\n\n", fmt_opt(report.spearman), fmt_opt(report.duplicate_ap));
    out += &format!("{:<24} {:<10} {:>6} {:>8}\n", "task", "kind", "pairs", "score");
    for t in &report.tasks {
        let kind = serde_json::to_value(t.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        out += &format!("{:<24} {:<10} {:>6} {:>8.4}\n", t.name, kind, t.pairs, t.score);
    }
    out += &format!("\n{:<8} {:>6} {:>10} {:>11} {:>9}\n", "bucket", "texts", "mean words", "mean tokens", "mean ms");
    for b in &report.length_scaling {
        out += &format!(
            "{:<8} {:>6} {:>10.1} {:>11.1} {:>9.4}\n",
            b.bucket, b.texts, b.mean_words, b.mean_tokens, b.mean_latency_ms
        );
    }
    out
}

fn model_pack(args: PackArgs) -> Result<(), CliError> {
    let model = match (args.random, &args.vocab, &args.matrix) {
        (Some((v, d)), _, _) => {
            if v == 0 || d == 0 {
                return Err(CliError::Model("random shape must be at least 1:1".into()));
            }
            let m = random_model(v, d, args.seed);
            let mut manifest = m.manifest().clone();
            manifest.version = args.version;
            manifest.case_folding = args.case_folding;
            if let Some(name) = &args.name {
                manifest.name = name.clone();
            }
            if let Some(unk) = args.unk_id {
                manifest.unk_token_id = unk;
            }
            EmbeddingModel::new(manifest, m.vocabulary().tokens().to_vec(), m.matrix().to_vec())?
        }
        (None, Some(vocab_path), Some(matrix_path)) => {
            let text = String::from_utf8(read_file(vocab_path)?).map_err(|_| usage("vocabulary file is not UTF-8"))?;
            let tokens: Vec<String> = text.lines().map(str::to_string).collect();
            let matrix = read_f32_file(matrix_path)?;
            if tokens.is_empty() || matrix.len() % tokens.len() != 0 {
                return Err(CliError::Model(format!(
                    "matrix has {} values, not a multiple of the {} vocabulary entries",
                    matrix.len(),
                    tokens.len()
                )));
            }
            let dim = matrix.len() / tokens.len();
            let unk = args
                .unk_id
                .unwrap_or_else(|| tokens.iter().position(|t| t == UNK_TOKEN).map_or(0, |i| i as u32));
            let name = args.name.clone().unwrap_or_else(|| {
                vocab_path.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned())
            });
            let mut manifest = ModelManifest::new(name, tokens.len() as u32, dim as u32, unk);
            manifest.version = args.version;
            manifest.case_folding = args.case_folding;
            EmbeddingModel::new(manifest, tokens, matrix)?
        }
        _ => return Err(usage("need --random V:D, or --vocab and --matrix")),
    };
    let bytes = model.to_bytes();
    std::fs::write(&args.out, &bytes).map_err(|e| usage(format!("cannot write {}: {e}", args.out.display())))?;
    eprintln!(
        "wrote {} ({} x {}, {} bytes)",
        args.out.display(),
        model.vocab_size(),
        model.dim(),
        bytes.len()
    );
    Ok(())
}

fn model_inspect(args: InspectArgs) -> Result<(), CliError> {
    let model = load(&args.model)?;
    let m = model.manifest();
    let vocab = model.vocabulary();
    let stats = row_norm_stats(&model);
    let preview: Vec<String> =
        vocab.tokens().iter().take(args.preview).map(|t| format!("{t:?}")).collect();
    let pooling = serde_json::to_value(m.pooling_default).ok().and_then(|v| v.as_str().map(str::to_string));
    let mut out = io::stdout().lock();
    let text = format!(
        "name: {}\nversion: {}\nvocab_size: {}\ndim: {}\ncase_folding: {}\nunk_token_id: {} ({:?})\npooling_default: {}\n\
         vocab preview: {}{}\nrow norm min: {:.6}\nrow norm max: {:.6}\nrow norm mean: {:.6}\n",
        m.name,
        m.version,
        m.vocab_size,
        m.dim,
        m.case_folding,
        m.unk_token_id,
        vocab.token(m.unk_token_id).unwrap_or(""),
        pooling.unwrap_or_default(),
        preview.join(" "),
        if vocab.len() > args.preview { " ..." } else { "" },
        stats.min,
        stats.max,
        stats.mean,
    );
    out.write_all(text.as_bytes()).map_err(|e| usage(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_stable() {
        assert_eq!(CliError::Usage(String::new()).exit_code(), 1);
        assert_eq!(CliError::Network(String::new()).exit_code(), 2);
        assert_eq!(CliError::Model(String::new()).exit_code(), 3);
    }

    #[test]
    fn reads_text_and_raw_f32() {
        let dir = tempfile::tempdir().unwrap();
        let txt = dir.path().join("w.txt");
        std::fs::write(&txt, "1 2.5\n-3e1\n").unwrap();
        assert_eq!(read_f32_file(&txt).unwrap(), [1.0, 2.5, -30.0]);
        let raw = dir.path().join("w.f32");
        let values = [0.5f32, -0.0, 7.0];
        std::fs::write(&raw, values.iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>()).unwrap();
        let back = read_f32_file(&raw).unwrap();
        assert!(back.iter().zip(values).all(|(a, b)| a.to_bits() == b.to_bits()));
        std::fs::write(&raw, [0u8; 5]).unwrap();
        assert!(read_f32_file(&raw).is_err());
    }
}
