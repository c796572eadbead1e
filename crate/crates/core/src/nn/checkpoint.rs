//! Binary checkpoint format.
//!
//! ```text
//! "NCKP"                     4 bytes magic
//! version                    u16 LE (currently 1)
//! spec_len, spec             u32 LE + UTF-8 JSON of the NetworkSpec
//! meta_len, meta             u32 LE + UTF-8 JSON of the TrainingMeta
//! weights                    f32 LE, every parameter tensor then every buffer
//!                            tensor of each layer, layers in declared order
//! ```
//!
//! Weight tensor sizes are implied by the spec; the file must end exactly
//! after the last weight.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::Network;
use super::spec::NetworkSpec;
use super::NnError;

pub const MAGIC: &[u8; 4] = b"NCKP";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs_run: usize,
    pub final_loss: f64,
    #[serde(default)]
    pub rng: String,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub network: Network<f32>,
    pub meta: TrainingMeta,
}

pub fn encode(net: &Network<f32>, meta: &TrainingMeta) -> Vec<u8> {
    let spec = serde_json::to_vec(net.spec()).expect("spec serializes");
    let meta = serde_json::to_vec(meta).expect("meta serializes");
    let weights: usize = net.blob_sizes().iter().sum();
    let mut out = Vec::with_capacity(14 + spec.len() + meta.len() + 4 * weights);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.len() as u32).to_le_bytes());
    out.extend_from_slice(&spec);
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    for blob in net.blobs() {
        for v in blob {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], NnError> {
        if self.buf.len() - self.pos < n {
            return Err(NnError::CorruptHeader(format!("file ends inside {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, NnError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(NnError::BadMagic);
    }
    let mut r = Reader { buf: bytes, pos: 4 };
    let version = u16::from_le_bytes(r.take(2, "version")?.try_into().unwrap());
    if version != VERSION {
        return Err(NnError::UnsupportedVersion(version));
    }
    let spec_len = r.u32("spec length")? as usize;
    let spec: NetworkSpec = serde_json::from_slice(r.take(spec_len, "spec")?)
        .map_err(|e| NnError::CorruptHeader(format!("network spec: {e}")))?;
    let meta_len = r.u32("metadata length")? as usize;
    let meta: TrainingMeta = serde_json::from_slice(r.take(meta_len, "metadata")?)
        .map_err(|e| NnError::CorruptHeader(format!("metadata: {e}")))?;

    let sizes = Network::<f32>::new(spec.clone(), 0)?.blob_sizes();
    let expected: usize = sizes.iter().sum::<usize>() * 4;
    let rest = &bytes[r.pos..];
    if rest.len() < expected {
        return Err(NnError::TruncatedWeights {
            expected,
            found: rest.len(),
        });
    }
    if rest.len() > expected {
        return Err(NnError::CorruptHeader(format!(
            "{} trailing bytes after weights",
            rest.len() - expected
        )));
    }
    let mut values = rest.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    let blobs = sizes.iter().map(|&n| values.by_ref().take(n).collect()).collect();
    Ok(Checkpoint {
        network: Network::from_blobs(spec, blobs)?,
        meta,
    })
}

pub fn save_checkpoint(net: &Network<f32>, meta: &TrainingMeta, path: &Path) -> Result<(), NnError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, encode(net, meta))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, NnError> {
    decode(&fs::read(path)?)
}
