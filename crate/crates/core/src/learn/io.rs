//! Model files: 8-byte magic, format version, architecture descriptor,
//! parameter count, then little-endian `f32` parameters.

use std::fs;
use std::path::Path;

use super::network::{Architecture, CnnModel};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"GPDCNN\r\n";
pub const FORMAT_VERSION: u32 = 1;

pub fn model_to_bytes(model: &CnnModel) -> Vec<u8> {
    let a = model.arch();
    let mut out = Vec::with_capacity(64 + model.params().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for v in [
        a.input_size,
        a.channels,
        a.conv1_filters,
        a.conv1_kernel,
        a.conv2_filters,
        a.conv2_kernel,
        a.hidden,
        a.classes,
    ] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&(model.params().len() as u64).to_le_bytes());
    for p in model.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn model_from_bytes(bytes: &[u8]) -> std::result::Result<CnnModel, String> {
    let header = 8 + 4 + 8 * 4 + 8;
    if bytes.len() < header || &bytes[..8] != MAGIC {
        return Err("not a model file".into());
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(8);
    if version != FORMAT_VERSION {
        return Err(format!("unsupported model version {version}"));
    }
    let f: Vec<usize> = (0..8).map(|i| u32_at(12 + 4 * i) as usize).collect();
    let arch = Architecture {
        input_size: f[0],
        channels: f[1],
        conv1_filters: f[2],
        conv1_kernel: f[3],
        conv2_filters: f[4],
        conv2_kernel: f[5],
        hidden: f[6],
        classes: f[7],
    };
    arch.validate().map_err(|e| e.to_string())?;
    let count = u64::from_le_bytes(bytes[44..52].try_into().unwrap()) as usize;
    if count != arch.layout().total {
        return Err(format!("parameter count {count} does not match the architecture"));
    }
    if bytes.len() != header + 4 * count {
        return Err("parameter blob has the wrong length".into());
    }
    let params = bytes[header..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    CnnModel::from_params(arch, params).map_err(|e| e.to_string())
}

pub fn save_model(model: &CnnModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<CnnModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes).map_err(|message| Error::ModelFormat {
        path: path.to_path_buf(),
        message,
    })
}
