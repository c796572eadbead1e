//! Wire protocol of the novelty monitor and a client for its line-delimited
//! JSON transport.
//!
//! Each request is one JSON object per line, `{"id": .., "image": ".."}`,
//! where `image` is the base64 encoding of 784 grayscale bytes. Each response
//! echoes the id and carries either the verdict, detector and evidence or an
//! `error` string.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use novelty_core::detectors::NoveltyVerdict;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader, Lines};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::{TcpStream, ToSocketAddrs};

pub const IMAGE_BYTES: usize = 784;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: Value,
    pub image: String,
}

impl Request {
    pub fn new(id: impl Into<Value>, image: &[u8]) -> Self {
        Self {
            id: id.into(),
            image: STANDARD.encode(image),
        }
    }

    /// Decodes the payload, which must be exactly 784 bytes.
    pub fn image_bytes(&self) -> Result<Vec<u8>, String> {
        let bytes = STANDARD
            .decode(self.image.trim())
            .map_err(|e| format!("bad base64 image: {e}"))?;
        if bytes.len() != IMAGE_BYTES {
            return Err(format!(
                "bad image length: {} bytes, expected {IMAGE_BYTES}",
                bytes.len()
            ));
        }
        Ok(bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: Value,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<NoveltyVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    pub fn ok(id: Value, verdict: NoveltyVerdict) -> Self {
        Self {
            id,
            outcome: Some(verdict),
            error: None,
        }
    }

    pub fn error(id: Value, message: impl Into<String>) -> Self {
        Self {
            id,
            outcome: None,
            error: Some(message.into()),
        }
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad response: {0}")]
    Decode(#[from] serde_json::Error),
    #[error("connection closed before a response arrived")]
    Closed,
}

/// A connection to a monitor's TCP transport. Requests are answered in
/// order, one at a time.
pub struct MonitorClient {
    lines: Lines<BufReader<OwnedReadHalf>>,
    writer: OwnedWriteHalf,
}

impl MonitorClient {
    pub async fn connect(addr: impl ToSocketAddrs) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(addr).await?;
        let (r, writer) = stream.into_split();
        Ok(Self {
            lines: BufReader::new(r).lines(),
            writer,
        })
    }

    /// Sends one raw line and waits for its response.
    pub async fn send_line(&mut self, line: &str) -> Result<Response, ClientError> {
        self.writer.write_all(line.as_bytes()).await?;
        self.writer.write_all(b"\n").await?;
        self.writer.flush().await?;
        let reply = self.lines.next_line().await?.ok_or(ClientError::Closed)?;
        Ok(serde_json::from_str(&reply)?)
    }

    pub async fn send(&mut self, request: &Request) -> Result<Response, ClientError> {
        self.send_line(&serde_json::to_string(request)?).await
    }

    pub async fn detect(&mut self, id: impl Into<Value>, image: &[u8]) -> Result<Response, ClientError> {
        self.send(&Request::new(id, image)).await
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use novelty_core::detectors::{DetectorKind, Evidence, Verdict};

    #[test]
    fn image_length_is_checked() {
        assert_eq!(Request::new(1, &[0u8; 784]).image_bytes().unwrap().len(), 784);
        let err = Request::new(1, &[0u8; 783]).image_bytes().unwrap_err();
        assert!(err.starts_with("bad image length"), "{err}");
        let r = Request {
            id: 1.into(),
            image: "!!".into(),
        };
        assert!(r.image_bytes().is_err());
    }

    #[test]
    fn response_shape() {
        let v = NoveltyVerdict {
            verdict: Verdict::Novel,
            detector: DetectorKind::Naive,
            evidence: Evidence::Reconstruction {
                score: 0.5,
                threshold: 0.1,
            },
        };
        let json = serde_json::to_value(Response::ok("a".into(), v.clone())).unwrap();
        assert_eq!(json["id"], "a");
        assert_eq!(json["verdict"], "novel");
        assert_eq!(json["detector"], "naive");
        assert_eq!(json["evidence"]["score"], 0.5);
        assert!(json.get("error").is_none());
        let back: Response = serde_json::from_value(json).unwrap();
        assert_eq!(back.outcome, Some(v));

        let err = serde_json::to_value(Response::error(7.into(), "bad image length")).unwrap();
        assert_eq!(err, serde_json::json!({"id": 7, "error": "bad image length"}));
        let back: Response = serde_json::from_value(err).unwrap();
        assert!(back.outcome.is_none());
    }

    #[test]
    fn scores_survive_the_wire_exactly() {
        // needs serde_json's exact float parser; the default one is off by an
        // ulp on values like this
        let v = NoveltyVerdict {
            verdict: Verdict::Known,
            detector: DetectorKind::Naive,
            evidence: Evidence::Reconstruction {
                score: 0.011873239648153679,
                threshold: 0.02278856623645985,
            },
        };
        let line = serde_json::to_string(&Response::ok(5.into(), v.clone())).unwrap();
        let back: Response = serde_json::from_str(&line).unwrap();
        assert_eq!(back.outcome, Some(v));
    }
}
