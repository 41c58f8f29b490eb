//! Versioned binary container for trained pipelines.
//!
//! Layout (little endian): 8-byte magic, `u32` format version, `u32` section
//! count, then per section a `u16` name length, the UTF-8 name, a `u64`
//! payload length and the JSON payload. A SHA-256 digest of all preceding
//! bytes closes the file. Embedding tables are not stored; the `meta`
//! section carries their checksum and a path hint.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bilstm::{BiLstmEncoder, TrainLog};
use crate::error::{Error, Result};
use crate::features::{BowView, FittedFeatures, RepresentationSelector, TextField, ViewSelector};
use crate::linear_models::LogRegModel;
use crate::pipeline::{HyperParams, Pipeline};

pub const MAGIC: &[u8; 8] = b"ALERTCLF";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub representation: RepresentationSelector,
    pub view: ViewSelector,
    pub seed: u64,
    pub hyperparams: HyperParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_checksum: Option<String>,
    /// Where the embedding table was read from (or written to) at training time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_path: Option<String>,
    pub crate_version: String,
}

fn bad(reason: impl Into<String>) -> Error {
    Error::BadModelFile(reason.into())
}

fn push_section<T: Serialize>(out: &mut Vec<u8>, name: &str, value: &T) -> Result<()> {
    let payload = serde_json::to_vec(value)?;
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    Ok(())
}

/// Serializes `pipeline` into container bytes.
pub fn to_bytes(pipeline: &Pipeline, embedding_path: Option<&str>) -> Result<Vec<u8>> {
    let meta = ModelMeta {
        representation: pipeline.representation,
        view: pipeline.view,
        seed: pipeline.seed,
        hyperparams: pipeline.hyperparams.clone(),
        embedding_checksum: pipeline.embedding_checksum.clone(),
        embedding_path: embedding_path.map(str::to_string),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let mut body = Vec::new();
    let mut count = 3u32;
    push_section(&mut body, "meta", &meta)?;
    push_section(&mut body, "bow", &pipeline.features.bow)?;
    push_section(&mut body, "encoders", &pipeline.features.encoders)?;
    if let Some(log) = &pipeline.train_log {
        push_section(&mut body, "train_log", log)?;
        count += 1;
    }
    push_section(&mut body, "head", &pipeline.head)?;
    count += 1;

    let mut out = Vec::with_capacity(body.len() + 48);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&body);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| bad("truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn section<T: DeserializeOwned>(sections: &BTreeMap<String, &[u8]>, name: &str) -> Result<T> {
    let raw = sections.get(name).ok_or_else(|| bad(format!("missing section \"{name}\"")))?;
    serde_json::from_slice(raw).map_err(|e| bad(format!("section \"{name}\": {e}")))
}

/// Parses container bytes. The returned pipeline has no embedding table
/// attached; RNN models need [`Pipeline::attach_embeddings`].
pub fn from_bytes(bytes: &[u8]) -> Result<(Pipeline, ModelMeta)> {
    if bytes.len() < MAGIC.len() + 8 + DIGEST_LEN {
        return Err(bad("truncated"));
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(bad("not a model file (bad magic)"));
    }
    let (content, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(content).as_slice() != digest {
        return Err(bad("checksum mismatch (file corrupted)"));
    }
    let mut r = Reader {
        buf: content,
        pos: MAGIC.len(),
    };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {version}")));
    }
    let count = r.u32()?;
    let mut sections = BTreeMap::new();
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|_| bad("section name is not UTF-8"))?;
        let len = usize::try_from(r.u64()?).map_err(|_| bad("section too large"))?;
        let payload = r.take(len)?;
        if sections.insert(name.to_string(), payload).is_some() {
            return Err(bad(format!("duplicate section \"{name}\"")));
        }
    }
    if r.pos != content.len() {
        return Err(bad("trailing bytes after last section"));
    }
    let meta: ModelMeta = section(&sections, "meta")?;
    let bow: BTreeMap<TextField, BowView> = section(&sections, "bow")?;
    let encoders: BTreeMap<TextField, BiLstmEncoder> = section(&sections, "encoders")?;
    let head: LogRegModel = section(&sections, "head")?;
    let train_log: Option<TrainLog> = match sections.contains_key("train_log") {
        true => Some(section(&sections, "train_log")?),
        false => None,
    };
    let pipeline = Pipeline {
        representation: meta.representation,
        view: meta.view,
        features: FittedFeatures {
            bow,
            encoders,
            embeddings: None,
        },
        head,
        hyperparams: meta.hyperparams.clone(),
        seed: meta.seed,
        embedding_checksum: meta.embedding_checksum.clone(),
        train_log,
    };
    Ok((pipeline, meta))
}

pub fn save(path: &Path, pipeline: &Pipeline, embedding_path: Option<&str>) -> Result<()> {
    let bytes = to_bytes(pipeline, embedding_path)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(Pipeline, ModelMeta)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
