//! Thin client for the embedding service over persistent HTTP/1.1
//! connections.

use std::fmt;
use std::io;
use std::str::FromStr;

use bytes::Bytes;
use http::header::{ACCEPT, CONTENT_TYPE, HOST};
use http::{Method, Request, StatusCode};
use http_body_util::{BodyExt, Full};
use hyper::client::conn::http1;
use hyper_util::rt::TokioIo;
use serde::{Deserialize, Serialize};
use staticembed_core::{decode, WireError, WireFormat};
use thiserror::Error;
use tokio::net::TcpStream;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("invalid target {0:?}: expected http://host:port")]
    InvalidTarget(String),
    #[error("cannot connect to {target}: {source}")]
    Connect { target: String, source: io::Error },
    #[error("http error: {0}")]
    Http(#[from] hyper::Error),
    #[error("server answered {status}: {error}: {message}")]
    Status { status: StatusCode, error: String, message: String },
    #[error("unexpected content type {0:?}")]
    ContentType(Option<String>),
    #[error(transparent)]
    Decode(#[from] WireError),
    #[error("bad json: {0}")]
    Json(#[from] serde_json::Error),
}

/// `host:port` of the service.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Target {
    authority: String,
}

impl Target {
    pub fn authority(&self) -> &str {
        &self.authority
    }
}

impl FromStr for Target {
    type Err = ClientError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ClientError::InvalidTarget(s.to_string());
        let rest = s.strip_prefix("http://").unwrap_or(s);
        if s.contains("://") && !s.starts_with("http://") {
            return Err(bad());
        }
        let authority = rest.trim_end_matches('/');
        let (host, port) = authority.rsplit_once(':').ok_or_else(bad)?;
        if host.is_empty() || authority.contains('/') || port.parse::<u16>().is_err() {
            return Err(bad());
        }
        Ok(Self { authority: authority.to_string() })
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "http://{}", self.authority)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model: String,
    pub dim: u32,
    pub vocab_size: u32,
}

#[derive(Debug, Clone)]
pub struct RawResponse {
    pub status: StatusCode,
    pub content_type: Option<String>,
    pub body: Bytes,
}

impl RawResponse {
    /// Turns a non-2xx response into [`ClientError::Status`].
    pub fn error_for_status(self) -> Result<Self, ClientError> {
        if self.status.is_success() {
            return Ok(self);
        }
        #[derive(Deserialize)]
        struct ErrorBody {
            error: String,
            message: String,
        }
        let (error, message) = match serde_json::from_slice::<ErrorBody>(&self.body) {
            Ok(b) => (b.error, b.message),
            Err(_) => ("unknown".into(), String::from_utf8_lossy(&self.body).into_owned()),
        };
        Err(ClientError::Status { status: self.status, error, message })
    }
}

/// Serializes the `/v1/embed` request body.
pub fn embed_body<S: AsRef<str>>(texts: &[S]) -> Bytes {
    #[derive(Serialize)]
    struct Body<'a> {
        texts: Vec<&'a str>,
    }
    let body = Body { texts: texts.iter().map(AsRef::as_ref).collect() };
    Bytes::from(serde_json::to_vec(&body).expect("request serializes"))
}

/// A POST to `/v1/embed` asking for `format` through the Accept header.
pub fn embed_request(target: &Target, body: Bytes, format: WireFormat) -> Request<Full<Bytes>> {
    Request::builder()
        .method(Method::POST)
        .uri("/v1/embed")
        .header(HOST, target.authority())
        .header(CONTENT_TYPE, "application/json")
        .header(ACCEPT, format.content_type())
        .body(Full::new(body))
        .expect("static request parts are valid")
}

fn get_request(target: &Target, path: &str) -> Request<Full<Bytes>> {
    Request::get(path)
        .header(HOST, target.authority())
        .body(Full::new(Bytes::new()))
        .expect("static request parts are valid")
}

/// One persistent connection. Requests on it are sequential.
pub struct Connection {
    sender: http1::SendRequest<Full<Bytes>>,
}

impl Connection {
    pub async fn open(target: &Target) -> Result<Self, ClientError> {
        let connect_err = |source| ClientError::Connect { target: target.to_string(), source };
        let stream = TcpStream::connect(target.authority()).await.map_err(connect_err)?;
        stream.set_nodelay(true).map_err(connect_err)?;
        let (sender, conn) = http1::handshake(TokioIo::new(stream)).await?;
        tokio::spawn(async move {
            let _ = conn.await;
        });
        Ok(Self { sender })
    }

    pub fn is_closed(&self) -> bool {
        self.sender.is_closed()
    }

    /// Sends `req` and reads the whole response body.
    pub async fn send(&mut self, req: Request<Full<Bytes>>) -> Result<RawResponse, ClientError> {
        self.sender.ready().await?;
        let response = self.sender.send_request(req).await?;
        let status = response.status();
        let content_type =
            response.headers().get(CONTENT_TYPE).and_then(|v| v.to_str().ok()).map(str::to_string);
        let body = response.into_body().collect().await?.to_bytes();
        Ok(RawResponse { status, content_type, body })
    }
}

/// Reconnects lazily when the server closes the connection.
pub struct Client {
    target: Target,
    conn: Option<Connection>,
}

impl Client {
    pub fn new(target: Target) -> Self {
        Self { target, conn: None }
    }

    pub fn target(&self) -> &Target {
        &self.target
    }

    pub async fn send(&mut self, req: Request<Full<Bytes>>) -> Result<RawResponse, ClientError> {
        let conn = match &mut self.conn {
            Some(c) if !c.is_closed() => c,
            slot => slot.insert(Connection::open(&self.target).await?),
        };
        let result = conn.send(req).await;
        if result.is_err() {
            self.conn = None;
        }
        result
    }

    /// Raw response body in `format`, or the server's error.
    pub async fn embed_raw<S: AsRef<str>>(
        &mut self,
        texts: &[S],
        format: WireFormat,
    ) -> Result<RawResponse, ClientError> {
        let req = embed_request(&self.target, embed_body(texts), format);
        self.send(req).await?.error_for_status()
    }

    pub async fn embed<S: AsRef<str>>(
        &mut self,
        texts: &[S],
        format: WireFormat,
    ) -> Result<Vec<Vec<f32>>, ClientError> {
        let response = self.embed_raw(texts, format).await?;
        let got = response.content_type.as_deref().and_then(WireFormat::from_content_type);
        if got != Some(format) {
            return Err(ClientError::ContentType(response.content_type));
        }
        Ok(decode(&response.body, format)?)
    }

    pub async fn health(&mut self) -> Result<Health, ClientError> {
        let req = get_request(&self.target, "/v1/health");
        let response = self.send(req).await?.error_for_status()?;
        Ok(serde_json::from_slice(&response.body)?)
    }

    pub async fn metrics(&mut self) -> Result<String, ClientError> {
        let req = get_request(&self.target, "/v1/metrics");
        let response = self.send(req).await?.error_for_status()?;
        Ok(String::from_utf8_lossy(&response.body).into_owned())
    }
}
