//! Checkpoint serialization.
//!
//! Layout: the magic bytes `CGNET1` and a newline, one line of UTF-8 JSON
//! (network spec string, tensor shapes, seed, epoch), then every parameter
//! as little-endian 64-bit floats in declaration order (per layer: weights,
//! then bias).

use super::{ModelParams, NetworkSpec};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8] = b"CGNET1";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub spec: String,
    pub shapes: Vec<Vec<usize>>,
    pub seed: u64,
    pub epoch: usize,
}

/// Writes a checkpoint; refuses nothing (callers decide about clobbering).
pub fn save_checkpoint(
    path: &Path,
    spec: &NetworkSpec,
    params: &ModelParams,
    seed: u64,
    epoch: usize,
) -> Result<()> {
    let header = CheckpointHeader {
        spec: spec.to_string(),
        shapes: params.tensor_shapes(),
        seed,
        epoch,
    };
    let mut file = std::fs::File::create(path)?;
    file.write_all(CHECKPOINT_MAGIC)?;
    file.write_all(b"\n")?;
    serde_json::to_writer(&mut file, &header).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    file.write_all(b"\n")?;
    let mut buf = Vec::new();
    for slice in params.tensor_slices() {
        for &v in slice {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    file.write_all(&buf)?;
    Ok(())
}

/// Reads a checkpoint back into a header and reconstructed parameters.
pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, ModelParams)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let magic_end = CHECKPOINT_MAGIC.len();
    if bytes.len() < magic_end + 1 || &bytes[..magic_end] != CHECKPOINT_MAGIC {
        return Err(Error::Load(format!(
            "{}: not a checkpoint (bad magic)",
            path.display()
        )));
    }
    if bytes[magic_end] != b'\n' {
        return Err(Error::Load(format!(
            "{}: malformed checkpoint header",
            path.display()
        )));
    }
    let rest = &bytes[magic_end + 1..];
    let json_end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Load(format!("{}: missing header terminator", path.display())))?;
    let header: CheckpointHeader = serde_json::from_slice(&rest[..json_end])
        .map_err(|e| Error::Load(format!("{}: bad header: {e}", path.display())))?;
    let payload = &rest[json_end + 1..];
    let expected: usize = header
        .shapes
        .iter()
        .map(|s| s.iter().product::<usize>())
        .sum();
    if payload.len() != expected * 8 {
        return Err(Error::Load(format!(
            "{}: expected {} parameter bytes, found {}",
            path.display(),
            expected * 8,
            payload.len()
        )));
    }
    let mut tensors: Vec<Vec<f64>> = Vec::with_capacity(header.shapes.len());
    let mut offset = 0usize;
    for shape in &header.shapes {
        let len: usize = shape.iter().product();
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            let mut le = [0u8; 8];
            le.copy_from_slice(&payload[offset..offset + 8]);
            values.push(f64::from_le_bytes(le));
            offset += 8;
        }
        tensors.push(values);
    }
    let spec = NetworkSpec::parse(&header.spec)?;
    let params = ModelParams::from_flat(&spec, &header.shapes, &tensors)?;
    Ok((header, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_bits() {
        let dir = tempfile::tempdir().unwrap();
        let spec = NetworkSpec::parse("GC4M3 - P2 - FC2").unwrap();
        let params = ModelParams::init(&spec, &[8, 4], 42).unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &spec, &params, 42, 7).unwrap();
        let (header, loaded) = load_checkpoint(&path).unwrap();
        assert_eq!(header.spec, "GC4M3 - P2 - FC2");
        assert_eq!(header.seed, 42);
        assert_eq!(header.epoch, 7);
        for (a, b) in params
            .tensor_slices()
            .iter()
            .zip(loaded.tensor_slices().iter())
        {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn bad_magic_and_truncation_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"NOTACKPT\n{}\n").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Load(_))));
        let spec = NetworkSpec::parse("FC2").unwrap();
        let params = ModelParams::init(&spec, &[4], 0).unwrap();
        let good = dir.path().join("model.ckpt");
        save_checkpoint(&good, &spec, &params, 0, 0).unwrap();
        let mut bytes = std::fs::read(&good).unwrap();
        bytes.truncate(bytes.len() - 4);
        std::fs::write(&good, bytes).unwrap();
        assert!(matches!(load_checkpoint(&good), Err(Error::Load(_))));
    }
}
