//! Binary checkpoint: `"DDNC"`, a version byte, a little-endian `u32` header
//! length, a JSON header, then every parameter as little-endian `f32` in
//! declared order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arch::{Arch, ModelParams, ModelSpec};
use crate::error::{Error, Result};
use crate::nn::LayerSpec;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"DDNC";
pub const VERSION: u8 = 1;
const PREAMBLE: usize = 4 + 1 + 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ParamHeader {
    name: String,
    shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    arch_id: Arch,
    input_shape: Vec<usize>,
    num_classes: usize,
    layers: Vec<LayerSpec>,
    params: Vec<ParamHeader>,
}

pub fn encode_checkpoint(spec: &ModelSpec, params: &ModelParams) -> Result<Vec<u8>> {
    let header = Header {
        arch_id: spec.arch(),
        input_shape: spec.input_shape().to_vec(),
        num_classes: spec.num_classes(),
        layers: spec.layers().to_vec(),
        params: params
            .iter()
            .map(|(name, t)| ParamHeader {
                name: name.to_string(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let header_len = u32::try_from(json.len()).map_err(|_| Error::invalid("checkpoint header too large"))?;
    let mut out = Vec::with_capacity(PREAMBLE + json.len() + 4 * params.num_values());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(&json);
    for t in params.tensors() {
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelSpec, ModelParams)> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic(bytes[..bytes.len().min(4)].to_vec()));
    }
    if bytes.len() < PREAMBLE {
        return Err(Error::TruncatedPayload {
            needed: PREAMBLE,
            found: bytes.len(),
        });
    }
    if bytes[4] != VERSION {
        return Err(Error::VersionMismatch {
            found: bytes[4],
            expected: VERSION,
        });
    }
    let header_len = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let header_end = PREAMBLE + header_len;
    if bytes.len() < header_end {
        return Err(Error::TruncatedPayload {
            needed: header_end,
            found: bytes.len(),
        });
    }
    let header: Header = serde_json::from_slice(&bytes[PREAMBLE..header_end])
        .map_err(|e| Error::HeaderMismatch(format!("unreadable header: {e}")))?;
    let spec = ModelSpec::new(header.arch_id, header.input_shape, header.layers, header.num_classes)
        .map_err(|e| Error::HeaderMismatch(e.to_string()))?;

    let slots = spec.param_slots();
    if slots.len() != header.params.len() {
        return Err(Error::HeaderMismatch(format!(
            "layers declare {} parameters, header lists {}",
            slots.len(),
            header.params.len()
        )));
    }
    for (slot, p) in slots.iter().zip(&header.params) {
        if slot.name != p.name || slot.shape != p.shape {
            return Err(Error::HeaderMismatch(format!(
                "parameter {} {:?} does not match layer slot {} {:?}",
                p.name, p.shape, slot.name, slot.shape
            )));
        }
    }

    let values: usize = header.params.iter().map(|p| p.shape.iter().product::<usize>()).sum();
    let needed = header_end + 4 * values;
    if bytes.len() < needed {
        return Err(Error::TruncatedPayload {
            needed,
            found: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(Error::HeaderMismatch(format!(
            "{} trailing bytes after the declared parameters",
            bytes.len() - needed
        )));
    }
    let mut floats = bytes[header_end..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
    let tensors = header
        .params
        .iter()
        .map(|p| {
            let n = p.shape.iter().product();
            Tensor::new(p.shape.clone(), floats.by_ref().take(n).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let params = ModelParams::new(&spec, tensors)?;
    Ok((spec, params))
}

pub fn save_checkpoint(spec: &ModelSpec, params: &ModelParams, path: &Path) -> Result<()> {
    std::fs::write(path, encode_checkpoint(spec, params)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelSpec, ModelParams)> {
    decode_checkpoint(&std::fs::read(path)?)
}
