//! Model checkpoints.
//!
//! Binary form (all integers `u32` little-endian, all parameters `f64`
//! little-endian):
//!
//! ```text
//! magic "MPLC" | version = 1 | kind (0 = linear, 1 = mlp)
//! linear: K | K weights | bias
//! mlp:    L | L + 1 widths | per layer: out x in weights (row-major), out biases
//! ```
//!
//! Text form carries the same numbers, whitespace separated:
//!
//! ```text
//! linear K
//! w_1 ... w_K
//! b
//! ```
//!
//! or `mlp d_0 d_1 ... d_L` followed, per layer, by one line per weight row
//! and one bias line. Floats use the shortest round-trip representation.

use std::path::Path;

use super::{DenseLayer, LinearModel, Model, TinyMlp};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MPLC";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckpointFormat {
    Binary,
    Text,
}

impl CheckpointFormat {
    /// `.txt` selects text, anything else binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("txt") => Self::Text,
            _ => Self::Binary,
        }
    }
}

pub fn write_checkpoint(model: &Model, format: CheckpointFormat) -> Vec<u8> {
    match format {
        CheckpointFormat::Binary => encode_binary(model),
        CheckpointFormat::Text => encode_text(model).into_bytes(),
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Model> {
    if bytes.starts_with(MAGIC) {
        decode_binary(bytes)
    } else {
        let text = std::str::from_utf8(bytes).map_err(|_| parse("checkpoint is neither binary nor UTF-8 text"))?;
        decode_text(text)
    }
}

fn parse(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn encode_binary(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let put_u32 = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    let put_f64s = |out: &mut Vec<u8>, vs: &[f64]| vs.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    match model {
        Model::Linear(m) => {
            put_u32(&mut out, 0);
            put_u32(&mut out, m.weights().len());
            put_f64s(&mut out, m.weights());
            put_f64s(&mut out, &[m.bias()]);
        }
        Model::Mlp(m) => {
            put_u32(&mut out, 1);
            put_u32(&mut out, m.layers().len());
            for d in m.dims() {
                put_u32(&mut out, d);
            }
            for layer in m.layers() {
                put_f64s(&mut out, layer.weights());
                put_f64s(&mut out, layer.bias());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| parse("checkpoint truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n)
            .map(|_| Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap())))
            .collect()
    }
}

fn decode_binary(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(parse(format!("unsupported checkpoint version {version}")));
    }
    let model = match r.u32()? {
        0 => {
            let k = r.u32()?;
            let weights = r.f64s(k)?;
            let bias = r.f64s(1)?[0];
            Model::Linear(LinearModel::new(weights, bias)?)
        }
        1 => {
            let n_layers = r.u32()?;
            let dims = (0..=n_layers).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            let mut layers = Vec::with_capacity(n_layers);
            for w in dims.windows(2) {
                let weights = r.f64s(w[0] * w[1])?;
                let bias = r.f64s(w[1])?;
                layers.push(DenseLayer::new(w[1], w[0], weights, bias)?);
            }
            Model::Mlp(TinyMlp::new(layers)?)
        }
        other => return Err(parse(format!("unknown model kind {other}"))),
    };
    if r.pos != bytes.len() {
        return Err(parse("trailing bytes after checkpoint"));
    }
    Ok(model)
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ")
}

fn encode_text(model: &Model) -> String {
    let mut out = String::new();
    match model {
        Model::Linear(m) => {
            out.push_str(&format!("linear {}\n", m.weights().len()));
            out.push_str(&join(m.weights()));
            out.push('\n');
            out.push_str(&format!("{:?}\n", m.bias()));
        }
        Model::Mlp(m) => {
            let dims: Vec<String> = m.dims().iter().map(|d| d.to_string()).collect();
            out.push_str(&format!("mlp {}\n", dims.join(" ")));
            for layer in m.layers() {
                for row in layer.weights().chunks_exact(layer.in_dim()) {
                    out.push_str(&join(row));
                    out.push('\n');
                }
                out.push_str(&join(layer.bias()));
                out.push('\n');
            }
        }
    }
    out
}

fn decode_text(text: &str) -> Result<Model> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| parse("empty checkpoint"))?.split_whitespace().collect();
    let numbers = |line: Option<&str>, n: usize| -> Result<Vec<f64>> {
        let line = line.ok_or_else(|| parse("checkpoint truncated"))?;
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| parse(format!("bad number {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != n {
            return Err(parse(format!("expected {n} values, found {}", vals.len())));
        }
        Ok(vals)
    };
    let dims = header[1..]
        .iter()
        .map(|t| t.parse::<usize>().map_err(|_| parse(format!("bad dimension {t:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let model = match header.first().copied() {
        Some("linear") if dims.len() == 1 => {
            let weights = numbers(lines.next(), dims[0])?;
            let bias = numbers(lines.next(), 1)?[0];
            Model::Linear(LinearModel::new(weights, bias)?)
        }
        Some("mlp") if dims.len() >= 2 => {
            let mut layers = Vec::new();
            for w in dims.windows(2) {
                let mut weights = Vec::with_capacity(w[0] * w[1]);
                for _ in 0..w[1] {
                    weights.extend(numbers(lines.next(), w[0])?);
                }
                let bias = numbers(lines.next(), w[1])?;
                layers.push(DenseLayer::new(w[1], w[0], weights, bias)?);
            }
            Model::Mlp(TinyMlp::new(layers)?)
        }
        _ => return Err(parse(format!("bad checkpoint header {header:?}"))),
    };
    if lines.next().is_some() {
        return Err(parse("trailing lines after checkpoint"));
    }
    Ok(model)
}

pub fn load_checkpoint(path: &Path) -> Result<Model> {
    read_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binary_layout_is_little_endian_row_major() {
        let m = Model::Linear(LinearModel::new(vec![1.5, -2.0], 0.25).unwrap());
        let bytes = write_checkpoint(&m, CheckpointFormat::Binary);
        assert_eq!(&bytes[..4], b"MPLC");
        assert_eq!(bytes.len(), 4 + 4 + 4 + 4 + 3 * 8);
        assert_eq!(&bytes[16..24], &1.5f64.to_le_bytes());
        assert_eq!(&bytes[32..40], &0.25f64.to_le_bytes());
    }

    #[test]
    fn rejects_truncated_and_garbage() {
        let m = Model::Mlp(TinyMlp::random(&[2, 4, 3], 0));
        let bytes = write_checkpoint(&m, CheckpointFormat::Binary);
        assert!(read_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        assert!(read_checkpoint(b"linear 2\n1 2\n").is_err());
        assert!(read_checkpoint(b"perceptron 2\n1 2\n0\n").is_err());
    }

    proptest! {
        #[test]
        fn checkpoints_round_trip(seed in any::<u64>(), hidden in 1usize..6, text in any::<bool>()) {
            let format = if text { CheckpointFormat::Text } else { CheckpointFormat::Binary };
            let mlp = Model::Mlp(TinyMlp::random(&[2, hidden, 3], seed));
            prop_assert_eq!(read_checkpoint(&write_checkpoint(&mlp, format)).unwrap(), mlp);
            let lin = Model::Linear(LinearModel::new(vec![seed as f64 * 1e-7, -1.0 / 3.0], 0.1).unwrap());
            prop_assert_eq!(read_checkpoint(&write_checkpoint(&lin, format)).unwrap(), lin);
        }
    }
}
