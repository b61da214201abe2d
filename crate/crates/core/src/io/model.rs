use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learned::{ModelConfig, ModelParams, Network, TensorEntry};

const MAGIC: &[u8] = b"ATDM1\n";
/// Upper bound on the JSON header line.
const MAX_HEADER: usize = 1 << 22;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: ModelConfig,
    seed: u64,
    tensors: Vec<TensorEntry>,
}

/// Magic, one JSON header line (config, seed, tensor manifest), then every
/// tensor as little-endian `f32` in manifest order.
pub fn encode_model(params: &ModelParams) -> Result<Vec<u8>> {
    let net = params.network()?;
    let header = Header {
        config: params.config.clone(),
        seed: params.seed,
        tensors: net.manifest().to_vec(),
    };
    let json = serde_json::to_string(&header)?;
    let mut out = Vec::with_capacity(MAGIC.len() + json.len() + 1 + 4 * params.values.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(json.as_bytes());
    out.push(b'\n');
    for v in &params.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelParams> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        let at = bytes.iter().zip(MAGIC).take_while(|(a, b)| a == b).count();
        return Err(Error::format(at as u64, "missing ATDM1 magic"));
    }
    let start = MAGIC.len();
    let end = bytes[start..]
        .iter()
        .take(MAX_HEADER)
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format(start as u64, "header line is missing or too long"))?;
    let header: Header = serde_json::from_slice(&bytes[start..start + end]).map_err(|e| {
        let col = e.column().saturating_sub(1);
        Error::format((start + col) as u64, format!("bad header: {e}"))
    })?;
    let net = Network::new(&header.config).map_err(|e| Error::format(start as u64, format!("bad model config: {e}")))?;
    if header.tensors != net.manifest() {
        return Err(Error::format(
            start as u64,
            "tensor manifest does not match the layout implied by the config",
        ));
    }
    let payload_at = start + end + 1;
    let payload = &bytes[payload_at..];
    let want = 4 * net.param_count();
    if payload.len() != want {
        return Err(Error::format(
            (payload_at + payload.len().min(want)) as u64,
            format!("payload is {} bytes, expected {want}", payload.len()),
        ));
    }
    let mut values = Vec::with_capacity(net.param_count());
    for (i, b) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        if !v.is_finite() {
            return Err(Error::format((payload_at + 4 * i) as u64, "non-finite parameter"));
        }
        values.push(v);
    }
    Ok(ModelParams {
        config: header.config,
        seed: header.seed,
        values,
    })
}
