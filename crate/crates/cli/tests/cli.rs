mod common;

use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::SeedableRng;
use staticembed_core::synth::{random_model, random_text};
use staticembed_core::WireFormat;

use common::{run, toy, write_model, Server};

/// Minimal HTTP/1.1 exchange; returns (status, headers, body) with chunked
/// bodies decoded.
fn http(addr: &str, method: &str, path: &str, accept: Option<&str>, body: &[u8]) -> (u16, String, Vec<u8>) {
    let mut stream = TcpStream::connect(addr).unwrap();
    let accept = accept.map(|a| format!("accept: {a}\r\n")).unwrap_or_default();
    let head = format!(
        "{method} {path} HTTP/1.1\r\nhost: {addr}\r\nconnection: close\r\ncontent-type: application/json\r\n{accept}content-length: {}\r\n\r\n",
        body.len()
    );
    stream.write_all(head.as_bytes()).unwrap();
    stream.write_all(body).unwrap();
    let mut raw = Vec::new();
    stream.read_to_end(&mut raw).unwrap();
    parse_response(&raw)
}

fn parse_response(raw: &[u8]) -> (u16, String, Vec<u8>) {
    let split = raw.windows(4).position(|w| w == b"\r\n\r\n").expect("header terminator");
    let head = String::from_utf8_lossy(&raw[..split]).to_string();
    let status = head[9..12].parse().unwrap();
    let mut body = raw[split + 4..].to_vec();
    if head.to_ascii_lowercase().contains("transfer-encoding: chunked") {
        body = dechunk(&body);
    }
    (status, head, body)
}

fn dechunk(mut data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    loop {
        let eol = data.windows(2).position(|w| w == b"\r\n").expect("chunk size line");
        let size = usize::from_str_radix(std::str::from_utf8(&data[..eol]).unwrap().trim(), 16).unwrap();
        data = &data[eol + 2..];
        if size == 0 {
            return out;
        }
        out.extend_from_slice(&data[..size]);
        data = &data[size + 2..];
    }
}

#[test]
fn serve_answers_health_within_a_second() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.semb", &toy());
    let start = Instant::now();
    let server = Server::start(&model, &[]);
    let healthy = loop {
        if let Ok(mut s) = TcpStream::connect(&server.addr) {
            let _ = s.write_all(b"GET /v1/health HTTP/1.1\r\nhost: x\r\nconnection: close\r\n\r\n");
            let mut raw = Vec::new();
            let _ = s.read_to_end(&mut raw);
            if raw.starts_with(b"HTTP/1.1 200") {
                break Some(raw);
            }
        }
        if start.elapsed() > Duration::from_secs(1) {
            break None;
        }
        std::thread::sleep(Duration::from_millis(10));
    };
    let raw = healthy.expect("no 200 from /v1/health within 1 s");
    let (_, _, body) = parse_response(&raw);
    let v: serde_json::Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v["dim"], 2);
    assert_eq!(v["model"], "toy");
}

#[test]
fn serve_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.semb", &toy());
    let occupied = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = occupied.local_addr().unwrap().to_string();
    let out = run(&["serve", "--model", model.to_str().unwrap(), "--bind", &addr], b"");
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    let bad = dir.path().join("bad.semb");
    std::fs::write(&bad, b"SEMB but not really").unwrap();
    let out = run(&["serve", "--model", bad.to_str().unwrap(), "--bind", "127.0.0.1:0"], b"");
    assert_eq!(out.status.code(), Some(3));

    let out = run(&["serve", "--model", model.to_str().unwrap(), "--max-batch-size", "0"], b"");
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn interrupt_during_stream_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let model = random_model(5000, 384, 4);
    let path = write_model(dir.path(), "m.semb", &model);
    let mut server = Server::start(&path, &["--handler-delay-ms", "200"]);
    let mut rng = StdRng::seed_from_u64(1);
    let texts: Vec<String> = (0..256).map(|_| random_text(&model, 20, &mut rng)).collect();
    let body = serde_json::to_vec(&serde_json::json!({ "texts": texts })).unwrap();

    // health first so the model is loaded before the stream starts
    let deadline = Instant::now() + Duration::from_secs(5);
    while http(&server.addr, "GET", "/v1/health", None, b"").0 != 200 {
        assert!(Instant::now() < deadline);
        std::thread::sleep(Duration::from_millis(20));
    }

    let mut stream = TcpStream::connect(&server.addr).unwrap();
    let head = format!(
        "POST /v1/embed HTTP/1.1\r\nhost: x\r\nconnection: close\r\naccept: application/x-ndjson\r\ncontent-length: {}\r\n\r\n",
        body.len()
    );
    stream.write_all(head.as_bytes()).unwrap();
    stream.write_all(&body).unwrap();
    // slow consumer: read a little, interrupt the server, then drain slowly
    let mut raw = vec![0u8; 4096];
    let n = stream.read(&mut raw).unwrap();
    raw.truncate(n);
    server.interrupt();
    let mut buf = [0u8; 8192];
    loop {
        match stream.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => raw.extend_from_slice(&buf[..n]),
            Err(e) => panic!("connection reset instead of closing cleanly: {e}"),
        }
        std::thread::sleep(Duration::from_millis(2));
    }
    let (status, _, body) = parse_response(&raw);
    assert_eq!(status, 200);
    let text = String::from_utf8(body).unwrap();
    assert_eq!(text.lines().count(), 256, "stream did not complete");
    assert_eq!(server.wait_exit(Duration::from_secs(7)), Some(0));
}

#[test]
fn embed_toy_jsonl_and_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "m.semb", &toy());
    let m = model.to_str().unwrap();
    let out = run(&["embed", "--model", m, "--format", "jsonl"], b"hello\n");
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.ends_with('\n'));
    let v: Vec<f32> = serde_json::from_str(text.trim_end()).unwrap();
    assert_eq!(v, [0.6f32, 0.8]);

    let out = run(&["embed", "--model", m, "--format", "binary", "hello"], b"");
    assert_eq!(&out.stdout[8..], [0.6f32.to_le_bytes(), 0.8f32.to_le_bytes()].concat());

    let out = run(&["embed", "--model", m, "--json-array"], b"[\"hello\\nhello\", \"hello\"]");
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["count"], 2);

    assert_eq!(run(&["embed", "--model", m], b"").status.code(), Some(1));
    assert_eq!(run(&["embed", "--model", m, "--json-array"], b"[]").status.code(), Some(1));
    assert_eq!(run(&["embed", "--model", m, "--json-array"], b"{").status.code(), Some(1));
    assert_eq!(run(&["embed", "--model", "/nonexistent.semb", "x"], b"").status.code(), Some(3));
    assert_eq!(run(&["embed", "--model", m, "--policy", "error", ""], b"").status.code(), Some(1));
}

#[test]
fn cli_output_matches_service_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let model = random_model(3000, 32, 8);
    let path = write_model(dir.path(), "m.semb", &model);
    let server = Server::start(&path, &[]);
    let mut rng = StdRng::seed_from_u64(2);
    let texts: Vec<String> = (0..20).map(|k| random_text(&model, 1 + k * 3, &mut rng)).collect();
    let stdin = texts.join("\n") + "\n";
    let body = serde_json::to_vec(&serde_json::json!({ "texts": texts })).unwrap();
    for format in WireFormat::ALL {
        let local = run(&["embed", "--model", path.to_str().unwrap(), "--format", format.as_str()], stdin.as_bytes());
        assert_eq!(local.status.code(), Some(0));
        let (status, _, service) = http(&server.addr, "POST", "/v1/embed", Some(format.content_type()), &body);
        assert_eq!(status, 200);
        assert_eq!(local.stdout, service, "{format}");
        let remote = run(&["embed", "--target", &server.url(), "--format", format.as_str()], stdin.as_bytes());
        assert_eq!(remote.status.code(), Some(0));
        assert_eq!(remote.stdout, service, "{format} via --target");
    }
}

#[test]
fn inspect_reports_manifest_and_norms() {
    let dir = tempfile::tempdir().unwrap();
    let toy_path = write_model(dir.path(), "toy.semb", &toy());
    let out = run(&["model-inspect", toy_path.to_str().unwrap()], b"");
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("dim: 2"));

    let model = random_model(10, 4, 21);
    let path = write_model(dir.path(), "r.semb", &model);
    let out = run(&["model-inspect", path.to_str().unwrap()], b"");
    let text = String::from_utf8(out.stdout).unwrap();
    let field = |name: &str| -> f64 {
        text.lines().find_map(|l| l.strip_prefix(name)).unwrap().trim().parse().unwrap()
    };
    let norms: Vec<f64> = model
        .matrix()
        .chunks(4)
        .map(|r| r.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt())
        .collect();
    let min = norms.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = norms.iter().cloned().fold(0.0, f64::max);
    let mean = norms.iter().sum::<f64>() / 10.0;
    for (name, want) in [("row norm min:", min), ("row norm max:", max), ("row norm mean:", mean)] {
        assert!((field(name) - want).abs() <= 1e-6, "{name} {} vs {want}", field(name));
    }

    let bytes = std::fs::read(&path).unwrap();
    let cut = dir.path().join("cut.semb");
    std::fs::write(&cut, &bytes[..bytes.len() - 10]).unwrap();
    let out = run(&["model-inspect", cut.to_str().unwrap()], b"");
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("corrupt"), "{err}");
}

#[test]
fn model_pack_from_files_and_random() {
    let dir = tempfile::tempdir().unwrap();
    let vocab = dir.path().join("vocab.txt");
    std::fs::write(&vocab, "[UNK]\nhello\nworld\n").unwrap();
    let matrix = dir.path().join("matrix.txt");
    std::fs::write(&matrix, "0 0\n3 4\n1 0\n").unwrap();
    let out_path = dir.path().join("packed.semb");
    let out = run(
        &[
            "model-pack", "--vocab", vocab.to_str().unwrap(), "--matrix", matrix.to_str().unwrap(),
            "--name", "mini", "--case-folding", "--out", out_path.to_str().unwrap(),
        ],
        b"",
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let model = staticembed_core::load_model_file(&out_path).unwrap();
    assert_eq!(model.dim(), 2);
    assert!(model.manifest().case_folding);
    assert_eq!(model.manifest().name, "mini");
    let out = run(&["embed", "--model", out_path.to_str().unwrap(), "--format", "jsonl", "HELLO"], b"");
    let v: Vec<f32> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v, [0.6f32, 0.8]);

    std::fs::write(&vocab, "a\na\n").unwrap();
    std::fs::write(&matrix, "1\n2\n").unwrap();
    let out = run(
        &["model-pack", "--vocab", vocab.to_str().unwrap(), "--matrix", matrix.to_str().unwrap(), "--out", out_path.to_str().unwrap()],
        b"",
    );
    assert_eq!(out.status.code(), Some(3));

    let out = run(&["model-pack", "--random", "50:3", "--seed", "9", "--out", out_path.to_str().unwrap()], b"");
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(staticembed_core::load_model_file(&out_path).unwrap(), random_model(50, 3, 9));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(run(&[], b"").status.code(), Some(1));
    assert_eq!(run(&["frobnicate"], b"").status.code(), Some(1));
    assert_eq!(run(&["embed", "--format", "xml", "--model", "m"], b"").status.code(), Some(1));
    assert_eq!(run(&["bench", "--target", "http://127.0.0.1:1", "--scenario", "nope"], b"").status.code(), Some(1));
    for verb in ["serve", "embed", "bench", "eval", "model-pack", "model-inspect"] {
        let out = run(&[verb, "--help"], b"");
        assert_eq!(out.status.code(), Some(0), "{verb}");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn eval_and_bench_commands() {
    let dir = tempfile::tempdir().unwrap();
    let model = random_model(2000, 16, 5);
    let path = write_model(dir.path(), "m.semb", &model);
    let report = dir.path().join("eval.json");
    let out = run(
        &["eval", "--model", path.to_str().unwrap(), "--texts-per-bucket", "20", "--out", report.to_str().unwrap()],
        b"",
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("duplicate_ap: 1.0000"), "{text}");
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(json["length_scaling"].as_array().unwrap().len(), 4);

    let pairs = dir.path().join("pairs.json");
    std::fs::write(&pairs, r#"[{"a":"x","b":"y","gold":0.5}]"#).unwrap();
    let out = run(&["eval", "--model", path.to_str().unwrap(), "--dataset", pairs.to_str().unwrap()], b"");
    assert_eq!(out.status.code(), Some(1), "too few pairs must be a data error");

    let server = Server::start(&path, &[]);
    let bench_out = dir.path().join("bench.json");
    let out = run(
        &[
            "bench", "--target", &server.url(), "--scenario", "single", "--threads", "1", "--connections", "2",
            "--duration", "1s", "--out", bench_out.to_str().unwrap(),
        ],
        b"",
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 2);
    let reports: serde_json::Value = serde_json::from_slice(&std::fs::read(&bench_out).unwrap()).unwrap();
    assert_eq!(reports[0]["error_count"], 0);

    let closed = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let out = run(&["bench", "--target", &format!("http://{closed}"), "--duration", "1s", "--threads", "1", "--connections", "1"], b"");
    assert_eq!(out.status.code(), Some(2));
}
