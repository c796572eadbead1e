use std::sync::Mutex;

use novelty_client::{Request, Response};
use novelty_core::dataset::normalize;
use novelty_core::detectors::Detector;
use serde_json::Value;

use crate::sink::{RecordSink, SinkError};

/// A detector plus the record sink. Request handling is synchronous and
/// adds no decision logic of its own.
#[derive(Debug)]
pub struct Monitor {
    detector: Detector,
    sink: Mutex<RecordSink>,
}

impl Monitor {
    pub fn new(detector: Detector, sink: RecordSink) -> Self {
        Self {
            detector,
            sink: Mutex::new(sink),
        }
    }

    pub fn detector(&self) -> &Detector {
        &self.detector
    }

    /// Sequence number the next recorded novelty will get.
    pub fn next_sequence(&self) -> u64 {
        self.sink.lock().unwrap().next_sequence()
    }

    /// Scores one request. Novel inputs are recorded before the response is
    /// returned. Failures become error responses carrying the request id.
    pub fn handle(&self, request: &Request) -> Response {
        let id = request.id.clone();
        let bytes = match request.image_bytes() {
            Ok(b) => b,
            Err(e) => return Response::error(id, e),
        };
        let verdict = match self.detector.detect(&normalize(&bytes)) {
            Ok(v) => v,
            Err(e) => return Response::error(id, format!("detector failed: {e}")),
        };
        if verdict.is_novel() {
            if let Err(e) = self.sink.lock().unwrap().append(&bytes, &verdict) {
                tracing::error!(error = %e, "failed to record novel input");
                return Response::error(id, format!("record sink failed: {e}"));
            }
        }
        Response::ok(id, verdict)
    }

    /// Parses and handles one line of the JSON-lines protocol.
    pub fn handle_line(&self, line: &str) -> Response {
        match serde_json::from_str::<Request>(line) {
            Ok(req) => self.handle(&req),
            Err(e) => {
                let id = serde_json::from_str::<Value>(line)
                    .ok()
                    .and_then(|v| v.get("id").cloned())
                    .unwrap_or(Value::Null);
                Response::error(id, format!("malformed request: {e}"))
            }
        }
    }

    pub fn sync(&self) -> Result<(), SinkError> {
        self.sink.lock().unwrap().sync()
    }
}
