use std::fmt::Write;
use std::sync::atomic::{AtomicU64, Ordering::Relaxed};
use std::time::Duration;

/// Upper bounds of the latency buckets, in milliseconds.
pub const LATENCY_BUCKETS_MS: [f64; 12] = [0.25, 0.5, 1.0, 2.5, 5.0, 10.0, 25.0, 50.0, 100.0, 250.0, 500.0, 1000.0];

// HTTP statuses the service can emit, in render order.
const STATUSES: [u16; 6] = [400, 404, 413, 429, 500, 503];

#[derive(Debug, Default)]
pub struct Metrics {
    requests: AtomicU64,
    inflight: AtomicU64,
    errors: [AtomicU64; STATUSES.len()],
    other_errors: AtomicU64,
    // one count per bucket plus the overflow bucket; not cumulative
    latency: [AtomicU64; LATENCY_BUCKETS_MS.len() + 1],
    latency_sum_us: AtomicU64,
}

/// Decrements the in-flight gauge when dropped.
pub struct InflightGuard<'a>(&'a Metrics);

impl Drop for InflightGuard<'_> {
    fn drop(&mut self) {
        self.0.inflight.fetch_sub(1, Relaxed);
    }
}

impl Metrics {
    pub fn start(&self) -> InflightGuard<'_> {
        self.requests.fetch_add(1, Relaxed);
        self.inflight.fetch_add(1, Relaxed);
        InflightGuard(self)
    }

    pub fn finish(&self, status: u16, elapsed: Duration) {
        if status >= 400 {
            match STATUSES.iter().position(|&s| s == status) {
                Some(i) => self.errors[i].fetch_add(1, Relaxed),
                None => self.other_errors.fetch_add(1, Relaxed),
            };
        }
        let ms = elapsed.as_secs_f64() * 1e3;
        let bucket = LATENCY_BUCKETS_MS.iter().position(|&le| ms <= le).unwrap_or(LATENCY_BUCKETS_MS.len());
        self.latency[bucket].fetch_add(1, Relaxed);
        self.latency_sum_us.fetch_add(elapsed.as_micros() as u64, Relaxed);
    }

    pub fn requests_total(&self) -> u64 {
        self.requests.load(Relaxed)
    }

    pub fn inflight(&self) -> u64 {
        self.inflight.load(Relaxed)
    }

    pub fn errors_for(&self, status: u16) -> u64 {
        STATUSES.iter().position(|&s| s == status).map_or(0, |i| self.errors[i].load(Relaxed))
    }

    /// One `name value` pair per line; histogram buckets are cumulative.
    pub fn render(&self) -> String {
        let mut out = String::with_capacity(1024);
        let _ = writeln!(out, "requests_total {}", self.requests.load(Relaxed));
        let _ = writeln!(out, "requests_inflight {}", self.inflight.load(Relaxed));
        for (status, count) in STATUSES.iter().zip(&self.errors) {
            let _ = writeln!(out, "errors_total{{status=\"{status}\"}} {}", count.load(Relaxed));
        }
        let other = self.other_errors.load(Relaxed);
        if other > 0 {
            let _ = writeln!(out, "errors_total{{status=\"other\"}} {other}");
        }
        let mut cumulative = 0;
        for (i, count) in self.latency.iter().enumerate() {
            cumulative += count.load(Relaxed);
            match LATENCY_BUCKETS_MS.get(i) {
                Some(le) => {
                    let _ = writeln!(out, "latency_ms_bucket{{le=\"{le}\"}} {cumulative}");
                }
                None => {
                    let _ = writeln!(out, "latency_ms_bucket{{le=\"+Inf\"}} {cumulative}");
                }
            }
        }
        let sum_ms = self.latency_sum_us.load(Relaxed) as f64 / 1e3;
        let _ = writeln!(out, "latency_ms_sum {sum_ms}");
        let _ = writeln!(out, "latency_ms_count {cumulative}");
        out
    }
}
