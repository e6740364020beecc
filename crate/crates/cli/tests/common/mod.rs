#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use staticembed_core::{EmbeddingModel, ModelManifest};

pub const BIN: &str = env!("CARGO_BIN_EXE_staticembed");

pub fn write_model(dir: &Path, name: &str, model: &EmbeddingModel) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, model.to_bytes()).unwrap();
    path
}

pub fn toy() -> EmbeddingModel {
    EmbeddingModel::new(ModelManifest::new("toy", 1, 2, 0), vec!["hello".into()], vec![3.0, 4.0]).unwrap()
}

pub fn run(args: &[&str], stdin: &[u8]) -> Output {
    let mut child = Command::new(BIN)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin).unwrap();
    child.wait_with_output().unwrap()
}

pub struct Server {
    pub child: Child,
    pub addr: String,
}

impl Server {
    pub fn start(model: &Path, extra: &[&str]) -> Self {
        let mut child = Command::new(BIN)
            .args(["serve", "--model", model.to_str().unwrap(), "--bind", "127.0.0.1:0"])
            .args(extra)
            .env_remove("STATICEMBED_BIND")
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .unwrap();
        let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
        let addr = loop {
            let line = lines.next().expect("server exited before announcing").unwrap();
            if let Some(rest) = line.strip_prefix("staticembed: listening on http://") {
                break rest.to_string();
            }
        };
        // keep draining stderr so the child never blocks on a full pipe
        std::thread::spawn(move || for _ in lines {});
        Self { child, addr }
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn interrupt(&self) {
        unsafe { libc::kill(self.child.id() as i32, libc::SIGINT) };
    }

    pub fn wait_exit(&mut self, limit: Duration) -> Option<i32> {
        let start = Instant::now();
        while start.elapsed() < limit {
            if let Some(status) = self.child.try_wait().unwrap() {
                return status.code();
            }
            std::thread::sleep(Duration::from_millis(20));
        }
        None
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

