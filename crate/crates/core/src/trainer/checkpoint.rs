//! Checkpoint file layout:
//!
//! ```text
//! "TXTLSTM1"                 8 bytes
//! header length              u32, little endian
//! header                     UTF-8 JSON
//! tensor payloads            little-endian floats, in manifest order
//! ```
//!
//! The header carries the vocabulary, hyperparameters and a manifest with
//! each tensor's shape and byte offset into the payload section. `f32` models
//! store binary32 payloads; `f64` models store binary64.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{
    Domain, LstmLayerParams, LstmModel, Matrix, ModelHyper, NnError, Precision, Scalar,
    SoftmaxLayerParams,
};
use crate::tokenizer::{Mode, TokenizerError, Vocab};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"TXTLSTM1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("checkpoint truncated in {0}")]
    Truncated(&'static str),
    #[error("malformed checkpoint header: {0}")]
    Header(String),
    #[error("unsupported checkpoint version {0} (expected {CHECKPOINT_VERSION})")]
    Version(u32),
    #[error("checkpoint holds {found} parameters but {expected} was requested")]
    PrecisionMismatch { found: Precision, expected: Precision },
    #[error("tensor manifest mismatch: {0}")]
    TensorMismatch(String),
    #[error(transparent)]
    Vocab(#[from] TokenizerError),
    #[error(transparent)]
    Model(#[from] NnError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 2],
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub precision: Precision,
    pub mode: Mode,
    pub domain: Domain,
    pub vocab: Vec<String>,
    pub hyper: ModelHyper,
    pub tensors: Vec<TensorEntry>,
}

pub fn to_bytes<F: Scalar>(model: &LstmModel<F>) -> Vec<u8> {
    let width = F::PRECISION.byte_width();
    let mut offset = 0;
    let mut entries = Vec::new();
    for (name, (r, c), data) in model.tensors() {
        entries.push(TensorEntry {
            name,
            shape: [r, c],
            offset,
        });
        offset += data.len() * width;
    }
    let header = CheckpointHeader {
        version: CHECKPOINT_VERSION,
        precision: F::PRECISION,
        mode: model.vocab().mode(),
        domain: model.domain(),
        vocab: model.vocab().tokens().to_vec(),
        hyper: *model.hyper(),
        tensors: entries,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(12 + json.len() + offset);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, _, data) in model.tensors() {
        for &v in data {
            v.write_le(&mut out);
        }
    }
    out
}

/// Parses only the header, returning it with the payload offset.
fn split_header(bytes: &[u8]) -> Result<(CheckpointHeader, usize), CheckpointError> {
    if bytes.len() < 8 {
        return Err(CheckpointError::Truncated("magic"));
    }
    if &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let len_bytes = bytes.get(8..12).ok_or(CheckpointError::Truncated("header length"))?;
    let len = u32::from_le_bytes(len_bytes.try_into().expect("4 bytes")) as usize;
    let json = bytes
        .get(12..12usize.saturating_add(len))
        .ok_or(CheckpointError::Truncated("header"))?;
    let header: CheckpointHeader =
        serde_json::from_slice(json).map_err(|e| CheckpointError::Header(e.to_string()))?;
    if header.version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(header.version));
    }
    Ok((header, 12 + len))
}

pub fn read_header(bytes: &[u8]) -> Result<CheckpointHeader, CheckpointError> {
    split_header(bytes).map(|(h, _)| h)
}

pub fn from_bytes<F: Scalar>(bytes: &[u8]) -> Result<LstmModel<F>, CheckpointError> {
    let (header, start) = split_header(bytes)?;
    if header.precision != F::PRECISION {
        return Err(CheckpointError::PrecisionMismatch {
            found: header.precision,
            expected: F::PRECISION,
        });
    }
    header.hyper.validate()?;
    let vocab = Vocab::from_tokens(header.mode, header.vocab.clone())?;

    // the manifest must describe exactly the tensors this hyper/vocab implies
    let h = header.hyper.hidden_size;
    let v = vocab.len();
    let mut expected: Vec<(String, [usize; 2])> = Vec::new();
    for l in 0..header.hyper.num_layers {
        let d = if l == 0 { v } else { h };
        expected.push((format!("layer{l}.w_x"), [4 * h, d]));
        expected.push((format!("layer{l}.w_h"), [4 * h, h]));
        expected.push((format!("layer{l}.b"), [1, 4 * h]));
    }
    expected.push(("output.w".into(), [v, h]));
    expected.push(("output.b".into(), [1, v]));
    if expected.len() != header.tensors.len() {
        return Err(CheckpointError::TensorMismatch(format!(
            "expected {} tensors, manifest lists {}",
            expected.len(),
            header.tensors.len()
        )));
    }

    let width = F::PRECISION.byte_width();
    let payload = &bytes[start..];
    let mut offset = 0;
    let mut tensors: Vec<Vec<F>> = Vec::with_capacity(expected.len());
    for ((name, shape), entry) in expected.iter().zip(&header.tensors) {
        if &entry.name != name || &entry.shape != shape {
            return Err(CheckpointError::TensorMismatch(format!(
                "expected {name} {shape:?}, found {} {:?}",
                entry.name, entry.shape
            )));
        }
        if entry.offset != offset {
            return Err(CheckpointError::TensorMismatch(format!(
                "{name} at byte offset {}, expected {offset}",
                entry.offset
            )));
        }
        let n = shape[0] * shape[1];
        let raw = payload
            .get(offset..offset + n * width)
            .ok_or(CheckpointError::Truncated("tensor payload"))?;
        tensors.push(raw.chunks_exact(width).map(F::read_le).collect());
        offset += n * width;
    }
    if payload.len() != offset {
        return Err(CheckpointError::TensorMismatch(format!(
            "{} trailing bytes after the last tensor",
            payload.len() - offset
        )));
    }

    let mut it = tensors.into_iter();
    let mut layers = Vec::with_capacity(header.hyper.num_layers);
    for l in 0..header.hyper.num_layers {
        let d = if l == 0 { v } else { h };
        let w_x = Matrix::from_vec(4 * h, d, it.next().expect("counted")).expect("shape checked");
        let w_h = Matrix::from_vec(4 * h, h, it.next().expect("counted")).expect("shape checked");
        let b = it.next().expect("counted");
        layers.push(LstmLayerParams { w_x, w_h, b });
    }
    let w = Matrix::from_vec(v, h, it.next().expect("counted")).expect("shape checked");
    let b = it.next().expect("counted");
    let model = LstmModel::from_parts(vocab, header.domain, header.hyper, layers, SoftmaxLayerParams { w, b })?;
    if !model.all_finite() {
        return Err(CheckpointError::Model(NnError::NonFinite { what: "checkpoint tensors" }));
    }
    Ok(model)
}

pub fn save_checkpoint<F: Scalar>(model: &LstmModel<F>, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, to_bytes(model)).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint<F: Scalar>(path: &Path) -> Result<LstmModel<F>, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::build_vocab;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model<F: Scalar>() -> LstmModel<F> {
        let vocab = build_vocab("_START_ C:maj G:7 D:min7 _END_", Mode::Word).unwrap();
        let hyper = ModelHyper { hidden_size: 5, ..ModelHyper::default() };
        LstmModel::new(vocab, hyper, &mut ChaCha8Rng::seed_from_u64(9)).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model::<f32>();
        let bytes = to_bytes(&m);
        let back: LstmModel<f32> = from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(to_bytes(&back), bytes);

        let m64 = model::<f64>();
        let back: LstmModel<f64> = from_bytes(&to_bytes(&m64)).unwrap();
        assert_eq!(back, m64);
    }

    #[test]
    fn header_is_readable_alone() {
        let h = read_header(&to_bytes(&model::<f32>())).unwrap();
        assert_eq!(h.vocab.len(), 5);
        assert_eq!(h.precision, Precision::F32);
        assert_eq!(h.domain, Domain::Chord);
        assert_eq!(h.tensors.len(), 8);
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let good = to_bytes(&model::<f32>());

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(from_bytes::<f32>(&bad), Err(CheckpointError::BadMagic)));

        let mut bad = good.clone();
        bad[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(from_bytes::<f32>(&bad), Err(CheckpointError::Truncated(_))));

        let mut bad = good.clone();
        bad[8..12].copy_from_slice(&10u32.to_le_bytes());
        assert!(matches!(from_bytes::<f32>(&bad), Err(CheckpointError::Header(_))));

        assert!(matches!(
            from_bytes::<f32>(&good[..good.len() - 3]),
            Err(CheckpointError::Truncated(_))
        ));
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(from_bytes::<f32>(&long), Err(CheckpointError::TensorMismatch(_))));
        assert!(matches!(from_bytes::<f32>(&good[..5]), Err(CheckpointError::Truncated(_))));

        assert!(matches!(
            from_bytes::<f64>(&good),
            Err(CheckpointError::PrecisionMismatch { .. })
        ));
    }

    fn rewrite_header(bytes: &[u8], edit: impl FnOnce(&mut serde_json::Value)) -> Vec<u8> {
        let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let mut v: serde_json::Value = serde_json::from_slice(&bytes[12..12 + len]).unwrap();
        edit(&mut v);
        let json = serde_json::to_vec(&v).unwrap();
        let mut out = bytes[..8].to_vec();
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&bytes[12 + len..]);
        out
    }

    #[test]
    fn manifest_must_match_tensors() {
        let good = to_bytes(&model::<f32>());
        let bad = rewrite_header(&good, |v| v["version"] = 7.into());
        assert!(matches!(from_bytes::<f32>(&bad), Err(CheckpointError::Version(7))));

        let bad = rewrite_header(&good, |v| v["tensors"][1]["shape"][1] = 6.into());
        assert!(matches!(from_bytes::<f32>(&bad), Err(CheckpointError::TensorMismatch(_))));

        let bad = rewrite_header(&good, |v| v["hyper"]["hidden_size"] = 6.into());
        assert!(matches!(from_bytes::<f32>(&bad), Err(CheckpointError::TensorMismatch(_))));

        let bad = rewrite_header(&good, |v| v["tensors"][2]["offset"] = 4.into());
        assert!(matches!(from_bytes::<f32>(&bad), Err(CheckpointError::TensorMismatch(_))));
    }
}
