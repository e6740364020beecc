//! Closed-loop HTTP load generation against the embedding service.
//!
//! Each worker thread owns a disjoint set of persistent connections; every
//! connection sends its next request as soon as the previous response has
//! been read. Latencies go into per-connection histograms that are merged
//! after the run.

mod report;
mod scenario;

use std::path::PathBuf;
use std::sync::{Arc, Barrier};
use std::time::{Duration, Instant};

use bytes::Bytes;
use hdrhistogram::Histogram;
use serde::{Deserialize, Serialize};
use staticembed_client::{embed_request, Client, ClientError, Connection, Target};
use staticembed_core::WireFormat;
use thiserror::Error;

pub use report::{ladder_shape, render_report, render_table, LadderShape};
pub use scenario::{builtin_corpus, preset, Scenario, ScenarioKind, PRESETS};

/// Pause between consecutive scenarios of a suite.
pub const COOLDOWN: Duration = Duration::from_secs(2);

/// Highest trackable latency, in microseconds.
const MAX_LATENCY_US: u64 = 3_600_000_000;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}")]
    Config(String),
    #[error("target {target} unreachable: {source}")]
    Connect { target: String, source: ClientError },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("runtime: {0}")]
    Runtime(std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scenario: String,
    pub format: WireFormat,
    pub total_requests: u64,
    /// Seconds.
    pub duration_actual: f64,
    pub rps: f64,
    pub texts_total: u64,
    pub texts_per_sec: f64,
    pub latency_p50: f64,
    pub latency_p90: f64,
    pub latency_p99: f64,
    pub latency_max: f64,
    pub error_count: u64,
    pub bytes_received: u64,
    /// More than half of all requests failed.
    pub degraded: bool,
    /// Requests completed by each connection.
    pub per_connection: Vec<u64>,
}

/// New latency histogram in microseconds with three significant digits.
pub fn latency_histogram() -> Histogram<u64> {
    Histogram::new_with_bounds(1, MAX_LATENCY_US, 3).expect("static histogram bounds")
}

/// Milliseconds at `quantile` of a microsecond histogram.
pub fn quantile_ms(hist: &Histogram<u64>, quantile: f64) -> f64 {
    hist.value_at_quantile(quantile) as f64 / 1e3
}

#[derive(Debug)]
struct ConnStats {
    hist: Histogram<u64>,
    requests: u64,
    errors: u64,
    texts: u64,
    bytes: u64,
}

#[derive(Debug)]
struct ThreadRun {
    conns: Vec<ConnStats>,
    start: Instant,
    end: Instant,
}

fn current_thread_runtime() -> Result<tokio::runtime::Runtime, BenchError> {
    tokio::runtime::Builder::new_current_thread().enable_all().build().map_err(BenchError::Runtime)
}

fn connect_error(target: &Target, source: ClientError) -> BenchError {
    BenchError::Connect { target: target.to_string(), source }
}

/// Runs one scenario to completion. Blocks the calling thread; must not be
/// called from inside an async runtime.
pub fn run_scenario(target: &Target, scenario: &Scenario) -> Result<BenchReport, BenchError> {
    scenario.validate()?;
    current_thread_runtime()?
        .block_on(async { Client::new(target.clone()).health().await })
        .map_err(|e| connect_error(target, e))?;

    let bodies = Arc::new(scenario.request_bodies());
    let format = scenario.effective_format();
    let threads = scenario.threads;
    let barrier = Barrier::new(threads);
    let runs: Vec<Result<ThreadRun, BenchError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let conn_ids: Vec<usize> = (t..scenario.connections).step_by(threads).collect();
                let bodies = bodies.clone();
                let barrier = &barrier;
                scope.spawn(move || run_thread(target, &conn_ids, bodies, format, scenario.duration(), barrier))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("bench worker panicked")).collect()
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(summarize(&scenario.name, format, runs))
}

fn run_thread(
    target: &Target,
    conn_ids: &[usize],
    bodies: Arc<Vec<(Bytes, usize)>>,
    format: WireFormat,
    duration: Duration,
    barrier: &Barrier,
) -> Result<ThreadRun, BenchError> {
    let rt = current_thread_runtime()?;
    let opened = rt.block_on(async {
        let mut conns = Vec::with_capacity(conn_ids.len());
        for _ in conn_ids {
            conns.push(Connection::open(target).await?);
        }
        Ok::<_, ClientError>(conns)
    });
    // every thread must reach the barrier, even after a failed connect
    barrier.wait();
    let conns = opened.map_err(|e| connect_error(target, e))?;
    let start = Instant::now();
    let deadline = start + duration;
    let stats = rt.block_on(futures::future::join_all(
        conns.into_iter().zip(conn_ids).map(|(conn, &id)| drive(target, conn, bodies.clone(), id, format, deadline)),
    ));
    Ok(ThreadRun { conns: stats, start, end: Instant::now() })
}

async fn drive(
    target: &Target,
    mut conn: Connection,
    bodies: Arc<Vec<(Bytes, usize)>>,
    first: usize,
    format: WireFormat,
    deadline: Instant,
) -> ConnStats {
    let mut stats = ConnStats { hist: latency_histogram(), requests: 0, errors: 0, texts: 0, bytes: 0 };
    let mut k = first;
    while Instant::now() < deadline {
        let (body, texts) = &bodies[k % bodies.len()];
        k += 1;
        let req = embed_request(target, body.clone(), format);
        let t0 = Instant::now();
        let result = conn.send(req).await;
        let us = t0.elapsed().as_micros().max(1) as u64;
        stats.hist.saturating_record(us);
        stats.requests += 1;
        match result {
            Ok(r) => {
                stats.bytes += r.body.len() as u64;
                if r.status.is_success() {
                    stats.texts += *texts as u64;
                } else {
                    stats.errors += 1;
                }
            }
            Err(_) => {
                stats.errors += 1;
                match Connection::open(target).await {
                    Ok(c) => conn = c,
                    Err(_) => tokio::time::sleep(Duration::from_millis(10)).await,
                }
            }
        }
    }
    stats
}

fn summarize(name: &str, format: WireFormat, runs: Vec<ThreadRun>) -> BenchReport {
    let start = runs.iter().map(|r| r.start).min().expect("at least one thread");
    let end = runs.iter().map(|r| r.end).max().expect("at least one thread");
    let duration_actual = (end - start).as_secs_f64();
    let mut hist = latency_histogram();
    let (mut requests, mut errors, mut texts, mut bytes) = (0, 0, 0, 0);
    let mut per_connection = Vec::new();
    for c in runs.iter().flat_map(|r| &r.conns) {
        hist.add(&c.hist).expect("histograms share bounds");
        requests += c.requests;
        errors += c.errors;
        texts += c.texts;
        bytes += c.bytes;
        per_connection.push(c.requests);
    }
    BenchReport {
        scenario: name.to_string(),
        format,
        total_requests: requests,
        duration_actual,
        rps: requests as f64 / duration_actual,
        texts_total: texts,
        texts_per_sec: texts as f64 / duration_actual,
        latency_p50: quantile_ms(&hist, 0.50),
        latency_p90: quantile_ms(&hist, 0.90),
        latency_p99: quantile_ms(&hist, 0.99),
        latency_max: hist.max() as f64 / 1e3,
        error_count: errors,
        bytes_received: bytes,
        degraded: errors * 2 > requests,
        per_connection,
    }
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub reports: Vec<BenchReport>,
    pub table: String,
    /// Soft checks that did not hold, e.g. texts/sec falling along a ladder.
    pub warnings: Vec<String>,
}

/// Runs `scenarios` in order with `cooldown` between them.
pub fn run_suite(target: &Target, scenarios: &[Scenario], cooldown: Duration) -> Result<SuiteResult, BenchError> {
    if scenarios.is_empty() {
        return Err(BenchError::Config("no scenarios to run".into()));
    }
    let mut reports = Vec::with_capacity(scenarios.len());
    for (i, s) in scenarios.iter().enumerate() {
        if i > 0 {
            std::thread::sleep(cooldown);
        }
        reports.push(run_scenario(target, s)?);
    }
    let mut warnings = Vec::new();
    for pair in reports.windows(2) {
        if pair[1].texts_per_sec < pair[0].texts_per_sec {
            warnings.push(format!(
                "texts/sec fell from {:.0} ({}) to {:.0} ({})",
                pair[0].texts_per_sec, pair[0].scenario, pair[1].texts_per_sec, pair[1].scenario
            ));
        }
    }
    for r in reports.iter().filter(|r| r.degraded) {
        warnings.push(format!("{}: degraded run, {} of {} requests failed", r.scenario, r.error_count, r.total_requests));
    }
    let table = render_table(&reports)?;
    Ok(SuiteResult { reports, table, warnings })
}
