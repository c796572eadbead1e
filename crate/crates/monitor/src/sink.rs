//! Append-only record log of novel inputs.
//!
//! Layout: `b"NREC"`, a little-endian `u16` version, then records of
//! `u32 payload length | u64 sequence | u64 timestamp (ms) | payload | u32 crc32`
//! where the checksum covers sequence, timestamp and payload. The payload is
//! the 784 image bytes followed by the verdict as JSON.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use novelty_client::IMAGE_BYTES;
use novelty_core::dataset::normalize;
use novelty_core::detectors::NoveltyVerdict;
use serde::Serialize;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"NREC";
pub const VERSION: u16 = 1;
const HEADER: usize = 6;
const FRAME: usize = 4 + 8 + 8 + 4;

#[derive(Debug, Error)]
pub enum SinkError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}: not a record file")]
    BadMagic(PathBuf),
    #[error("{path}: unsupported record format version {version}")]
    UnsupportedVersion { path: PathBuf, version: u16 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoveltyRecord {
    pub sequence: u64,
    pub timestamp_ms: u64,
    pub image: Vec<u8>,
    pub verdict: NoveltyVerdict,
}

impl NoveltyRecord {
    /// Pixels scaled to `[0, 1]`, ready to be used as an unlabelled training input.
    pub fn pixels(&self) -> Vec<f32> {
        normalize(&self.image)
    }
}

/// Why reading stopped before the end of the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Truncation {
    /// Offset of the first byte that is not part of a complete record.
    pub offset: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordLog {
    pub records: Vec<NoveltyRecord>,
    pub truncation: Option<Truncation>,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SinkError + '_ {
    move |source| SinkError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn checksum(seq: u64, ts: u64, payload: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(&seq.to_le_bytes());
    h.update(&ts.to_le_bytes());
    h.update(payload);
    h.finalize()
}

fn decode_record(bytes: &[u8]) -> Result<(NoveltyRecord, usize), String> {
    if bytes.len() < 4 {
        return Err("partial record length".into());
    }
    let len = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
    let total = FRAME + len;
    if bytes.len() < total {
        return Err(format!("record needs {total} bytes, {} left", bytes.len()));
    }
    let seq = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
    let ts = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let payload = &bytes[20..20 + len];
    let crc = u32::from_le_bytes(bytes[20 + len..total].try_into().unwrap());
    if crc != checksum(seq, ts, payload) {
        return Err(format!("checksum mismatch in record {seq}"));
    }
    if len < IMAGE_BYTES {
        return Err(format!("record {seq} payload too short"));
    }
    let verdict = serde_json::from_slice(&payload[IMAGE_BYTES..]).map_err(|e| format!("record {seq} verdict: {e}"))?;
    Ok((
        NoveltyRecord {
            sequence: seq,
            timestamp_ms: ts,
            image: payload[..IMAGE_BYTES].to_vec(),
            verdict,
        },
        total,
    ))
}

/// Reads every complete record. A damaged tail (typically a write cut short
/// by a crash) ends the scan with a warning; earlier records are kept.
pub fn read_records(path: &Path) -> Result<RecordLog, SinkError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    if bytes.len() < HEADER || &bytes[..4] != MAGIC {
        return Err(SinkError::BadMagic(path.to_path_buf()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(SinkError::UnsupportedVersion {
            path: path.to_path_buf(),
            version,
        });
    }
    let mut records = Vec::new();
    let mut at = HEADER;
    let mut truncation = None;
    while at < bytes.len() {
        match decode_record(&bytes[at..]) {
            Ok((r, used)) => {
                records.push(r);
                at += used;
            }
            Err(reason) => {
                tracing::warn!(path = %path.display(), offset = at, %reason, "record log truncated");
                truncation = Some(Truncation {
                    offset: at as u64,
                    reason,
                });
                break;
            }
        }
    }
    Ok(RecordLog { records, truncation })
}

/// Single writer for a record log. Each record goes out in one write call,
/// so a killed process leaves at most one partial record behind.
#[derive(Debug)]
pub struct RecordSink {
    path: PathBuf,
    file: File,
    next_sequence: u64,
}

impl RecordSink {
    /// Opens or creates the log. A damaged tail from an earlier crash is cut
    /// off and numbering resumes after the last complete record.
    pub fn open(path: &Path) -> Result<Self, SinkError> {
        let exists = path.exists() && std::fs::metadata(path).map_err(io_err(path))?.len() > 0;
        let mut next_sequence = 0;
        if exists {
            let log = read_records(path)?;
            if let Some(last) = log.records.last() {
                next_sequence = last.sequence + 1;
            }
            if let Some(t) = log.truncation {
                let f = OpenOptions::new().write(true).open(path).map_err(io_err(path))?;
                f.set_len(t.offset).map_err(io_err(path))?;
            }
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err(path))?;
        if !exists {
            let mut header = MAGIC.to_vec();
            header.extend(VERSION.to_le_bytes());
            file.write_all(&header).map_err(io_err(path))?;
        }
        Ok(Self {
            path: path.to_path_buf(),
            file,
            next_sequence,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn next_sequence(&self) -> u64 {
        self.next_sequence
    }

    /// Appends one record and returns its sequence number.
    pub fn append(&mut self, image: &[u8], verdict: &NoveltyVerdict) -> Result<u64, SinkError> {
        let seq = self.next_sequence;
        let ts = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        let mut payload = image.to_vec();
        payload.extend(serde_json::to_vec(verdict).expect("verdicts serialize"));
        let mut buf = Vec::with_capacity(FRAME + payload.len());
        buf.extend((payload.len() as u32).to_le_bytes());
        buf.extend(seq.to_le_bytes());
        buf.extend(ts.to_le_bytes());
        buf.extend(&payload);
        buf.extend(checksum(seq, ts, &payload).to_le_bytes());
        self.file.write_all(&buf).map_err(io_err(&self.path))?;
        self.next_sequence += 1;
        Ok(seq)
    }

    /// Forces written records to disk.
    pub fn sync(&mut self) -> Result<(), SinkError> {
        self.file.flush().map_err(io_err(&self.path))?;
        self.file.sync_data().map_err(io_err(&self.path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use novelty_core::detectors::{DetectorKind, Evidence, Verdict};

    fn verdict(score: f64) -> NoveltyVerdict {
        NoveltyVerdict {
            verdict: Verdict::Novel,
            detector: DetectorKind::Naive,
            evidence: Evidence::Reconstruction { score, threshold: 0.01 },
        }
    }

    #[test]
    fn empty_sink_reads_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.nrec");
        RecordSink::open(&path).unwrap();
        let log = read_records(&path).unwrap();
        assert!(log.records.is_empty());
        assert!(log.truncation.is_none());
    }

    #[test]
    fn truncated_tail_is_recovered() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.nrec");
        let mut sink = RecordSink::open(&path).unwrap();
        for i in 0..5 {
            assert_eq!(sink.append(&[i as u8; 784], &verdict(i as f64)).unwrap(), i);
        }
        drop(sink);
        let log = read_records(&path).unwrap();
        assert_eq!(
            log.records.iter().map(|r| r.sequence).collect::<Vec<_>>(),
            vec![0, 1, 2, 3, 4]
        );
        assert_eq!(log.records[3].image, vec![3u8; 784]);
        assert_eq!(log.records[3].verdict, verdict(3.0));

        let len = std::fs::metadata(&path).unwrap().len();
        let f = OpenOptions::new().write(true).open(&path).unwrap();
        f.set_len(len - 10).unwrap();
        let log = read_records(&path).unwrap();
        assert_eq!(log.records.len(), 4);
        assert!(log.truncation.is_some());

        // reopening cuts the partial record and continues the numbering
        let mut sink = RecordSink::open(&path).unwrap();
        assert_eq!(sink.append(&[9; 784], &verdict(9.0)).unwrap(), 4);
        let log = read_records(&path).unwrap();
        assert_eq!(log.records.len(), 5);
        assert!(log.truncation.is_none());
    }

    #[test]
    fn corrupt_byte_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.nrec");
        let mut sink = RecordSink::open(&path).unwrap();
        sink.append(&[1; 784], &verdict(1.0)).unwrap();
        sink.append(&[2; 784], &verdict(2.0)).unwrap();
        drop(sink);
        let mut bytes = std::fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - 100] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();
        let log = read_records(&path).unwrap();
        assert_eq!(log.records.len(), 1);
        assert!(log.truncation.unwrap().reason.contains("checksum"));
    }

    #[test]
    fn header_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.nrec");
        std::fs::write(&path, b"NOPE\x01\x00").unwrap();
        assert!(matches!(read_records(&path), Err(SinkError::BadMagic(_))));
        std::fs::write(&path, b"NREC\x09\x00").unwrap();
        assert!(matches!(
            read_records(&path),
            Err(SinkError::UnsupportedVersion { version: 9, .. })
        ));
        assert!(matches!(
            RecordSink::open(&path),
            Err(SinkError::UnsupportedVersion { .. })
        ));
    }
}
