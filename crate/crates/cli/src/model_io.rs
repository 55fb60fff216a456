//! Binary model file: a fixed header (magic, version, m, p, q, C) followed
//! by the four parameter tensors as row-major little-endian f64 blobs in
//! declaration order (w0, a_learn, head_w, head_b).

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use dyngraph_core::matrix::Matrix;
use dyngraph_core::model::ModelParams;

const MAGIC: &[u8; 4] = b"DGNN";
const VERSION: u32 = 1;

pub fn save_model(path: &Path, params: &ModelParams) -> Result<()> {
    let (m, p, q, c) = (
        params.nodes(),
        params.input_dim(),
        params.hidden_dim(),
        params.classes(),
    );
    let mut bytes = Vec::with_capacity(24 + 8 * (p * q + m * m + q * c + c));
    bytes.extend_from_slice(MAGIC);
    for value in [VERSION, m as u32, p as u32, q as u32, c as u32] {
        bytes.extend_from_slice(&value.to_le_bytes());
    }
    for tensor in [&params.w0, &params.a_learn, &params.head_w, &params.head_b] {
        for &v in tensor.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).with_context(|| format!("writing model {}", path.display()))
}

pub fn load_model(path: &Path) -> Result<ModelParams> {
    let bytes = fs::read(path).with_context(|| format!("reading model {}", path.display()))?;
    if bytes.len() < 24 || &bytes[..4] != MAGIC {
        bail!("{}: not a model file (bad magic)", path.display());
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let version = word(0);
    if version != VERSION {
        bail!("{}: unsupported model version {version}", path.display());
    }
    let (m, p, q, c) = (
        word(1) as usize,
        word(2) as usize,
        word(3) as usize,
        word(4) as usize,
    );
    let expected = 24 + 8 * (p * q + m * m + q * c + c);
    if bytes.len() != expected {
        bail!(
            "{}: truncated model file ({} bytes, expected {expected})",
            path.display(),
            bytes.len()
        );
    }
    let mut offset = 24;
    let mut read_tensor = |rows: usize, cols: usize| -> Result<Matrix> {
        let count = rows * cols;
        let mut data = Vec::with_capacity(count);
        for k in 0..count {
            let at = offset + 8 * k;
            data.push(f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()));
        }
        offset += 8 * count;
        Matrix::from_vec(rows, cols, data).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    };
    let params = ModelParams {
        w0: read_tensor(p, q)?,
        a_learn: read_tensor(m, m)?,
        head_w: read_tensor(q, c)?,
        head_b: read_tensor(1, c)?,
    };
    params
        .validate()
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use dyngraph_core::graph::chain_graph;
    use dyngraph_core::similarity::dice_matrix;

    #[test]
    fn model_round_trips_bit_exactly() {
        let dice = dice_matrix(&chain_graph(5, 1));
        let params = ModelParams::init(5, 3, 4, 2, &dice, 77).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&path, &params).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(params.w0.data(), back.w0.data());
        assert_eq!(params.a_learn.data(), back.a_learn.data());
        assert_eq!(params.head_w.data(), back.head_w.data());
        assert_eq!(params.head_b.data(), back.head_b.data());
    }

    #[test]
    fn bad_magic_and_truncation_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        fs::write(&path, b"NOPE").unwrap();
        assert!(load_model(&path).is_err());

        let dice = dice_matrix(&chain_graph(3, 1));
        let params = ModelParams::init(3, 2, 2, 2, &dice, 1).unwrap();
        let good = dir.path().join("model.bin");
        save_model(&good, &params).unwrap();
        let mut bytes = fs::read(&good).unwrap();
        bytes.truncate(bytes.len() - 5);
        fs::write(&good, bytes).unwrap();
        let err = load_model(&good).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
    }
}
