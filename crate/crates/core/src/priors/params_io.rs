use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelKind, ModelSpec, PriorParams};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"DWPM";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    model_kind: ModelKind,
    spec: ModelSpec,
    alpha: f64,
    #[serde(default)]
    train_alpha: bool,
}

/// Writes `DWPM`: magic, u32 header length, JSON header
/// `{model_kind, spec, alpha}`, u64 weight count, little-endian f64 weights.
pub fn save_params(params: &PriorParams, path: &Path) -> Result<()> {
    let header = serde_json::to_vec(&Header {
        model_kind: params.model_kind(),
        spec: params.spec.clone(),
        alpha: params.alpha,
        train_alpha: params.train_alpha,
    })
    .expect("header serializes");
    let mut buf = Vec::with_capacity(16 + header.len() + 8 * params.weights.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    buf.extend_from_slice(&(params.weights.len() as u64).to_le_bytes());
    for w in &params.weights {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_params(path: &Path) -> Result<PriorParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::format("DWPM", msg);
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(bad("missing DWPM magic".into()));
    }
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let body = bytes.get(8..8 + hlen).ok_or_else(|| bad("truncated header".into()))?;
    let header: Header = serde_json::from_slice(body).map_err(|e| bad(e.to_string()))?;
    if header.model_kind != header.spec.kind() {
        return Err(bad("model_kind disagrees with spec".into()));
    }
    let rest = &bytes[8 + hlen..];
    if rest.len() < 8 {
        return Err(bad("missing weight count".into()));
    }
    let count = u64::from_le_bytes(rest[..8].try_into().unwrap()) as usize;
    if count != header.spec.param_count() || rest.len() != 8 + 8 * count {
        return Err(bad(format!("weight block does not match a {count}-parameter model")));
    }
    let weights = rest[8..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(PriorParams {
        spec: header.spec,
        alpha: header.alpha,
        train_alpha: header.train_alpha,
        weights,
    })
}
