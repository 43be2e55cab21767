//! Binary checkpoint layout (all integers and floats little-endian):
//!
//! ```text
//! b"IMPLNT01"
//! u32 layer_count
//! u32 dims[layer_count + 1]
//! per layer: f64 weights (row-major), f64 biases
//! u8 head tag: 0 = plain, 1 = policy head, 2 = discriminator head
//! policy head:        f64 log_std[output_dim]
//! discriminator head: f64 input_mean[input_dim], f64 input_std[input_dim]
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{Dense, Mlp};

const MAGIC: &[u8; 8] = b"IMPLNT01";
const MAX_DIM: u32 = 1 << 20;

#[derive(Clone, Debug, PartialEq)]
pub enum Head {
    Plain,
    Policy { log_std: Vec<f64> },
    Discriminator { mean: Vec<f64>, std: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub net: Mlp,
    pub head: Head,
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.net.param_count() * 8);
        out.extend_from_slice(MAGIC);
        let dims = self.net.dims();
        out.extend_from_slice(&((dims.len() - 1) as u32).to_le_bytes());
        for &d in dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        let put = |out: &mut Vec<u8>, xs: &[f64]| {
            for x in xs {
                out.extend_from_slice(&x.to_le_bytes());
            }
        };
        for l in self.net.layers() {
            put(&mut out, &l.weights);
            put(&mut out, &l.biases);
        }
        match &self.head {
            Head::Plain => out.push(0),
            Head::Policy { log_std } => {
                out.push(1);
                put(&mut out, log_std);
            }
            Head::Discriminator { mean, std } => {
                out.push(2);
                put(&mut out, mean);
                put(&mut out, std);
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| "truncated header")?;
        if &magic != MAGIC {
            return Err("bad magic bytes".into());
        }
        let read_u32 = |r: &mut &[u8]| -> std::result::Result<u32, String> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|_| "truncated dims")?;
            Ok(u32::from_le_bytes(b))
        };
        let read_f64s = |r: &mut &[u8], n: usize| -> std::result::Result<Vec<f64>, String> {
            if r.len() < n * 8 {
                return Err("truncated parameters".into());
            }
            let (head, rest) = r.split_at(n * 8);
            *r = rest;
            Ok(head
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let layer_count = read_u32(&mut r)?;
        if layer_count == 0 || layer_count > 64 {
            return Err(format!("implausible layer count {layer_count}"));
        }
        let mut dims = Vec::with_capacity(layer_count as usize + 1);
        for _ in 0..=layer_count {
            let d = read_u32(&mut r)?;
            if d == 0 || d > MAX_DIM {
                return Err(format!("implausible layer width {d}"));
            }
            dims.push(d as usize);
        }
        let mut layers = Vec::with_capacity(layer_count as usize);
        for w in dims.windows(2) {
            let weights = read_f64s(&mut r, w[0] * w[1])?;
            let biases = read_f64s(&mut r, w[1])?;
            layers.push(Dense {
                n_in: w[0],
                n_out: w[1],
                weights,
                biases,
            });
        }
        let net = Mlp::from_layers(layers).map_err(|e| e.to_string())?;
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag).map_err(|_| "missing head tag")?;
        let head = match tag[0] {
            0 => Head::Plain,
            1 => Head::Policy {
                log_std: read_f64s(&mut r, net.output_dim())?,
            },
            2 => Head::Discriminator {
                mean: read_f64s(&mut r, net.input_dim())?,
                std: read_f64s(&mut r, net.input_dim())?,
            },
            t => return Err(format!("unknown head tag {t}")),
        };
        if !r.is_empty() {
            return Err(format!("{} trailing bytes", r.len()));
        }
        Ok(Checkpoint { net, head })
    }
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&ckpt.encode())?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let bytes = std::fs::read(path)?;
    Checkpoint::decode(&bytes).map_err(|reason| Error::Format {
        path: path.to_path_buf(),
        reason,
    })
}
