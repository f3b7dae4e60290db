//! Flat binary network checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        4 bytes  "CMNN"
//! version      u32      1
//! input_width  u64
//! layer_count  u32
//! per layer:
//!   tag        u8       0 dense, 1 leaky_relu, 2 dropout, 3 tanh
//!   dense:     fan_in u64, fan_out u64, W as f64[fan_in*fan_out] row-major, b as f64[fan_out]
//!   leaky:     slope f64
//!   dropout:   rate f64
//!   tanh:      (no payload)
//! ```
//!
//! Only parameters are stored; gradients and optimizer state are not.

use std::io::{Read, Write};

use super::matrix::RealMatrix;
use super::net::{DenseParams, Layer, NeuralNet};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CMNN";
pub const VERSION: u32 = 1;

const TAG_DENSE: u8 = 0;
const TAG_LEAKY: u8 = 1;
const TAG_DROPOUT: u8 = 2;
const TAG_TANH: u8 = 3;

// Sanity cap on declared sizes so a corrupt header cannot request huge allocations.
const MAX_DIM: u64 = 1 << 20;

pub fn write_net<W: Write>(net: &NeuralNet, w: &mut W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(net.input_width() as u64).to_le_bytes())?;
    w.write_all(&(net.layers.len() as u32).to_le_bytes())?;
    for layer in &net.layers {
        match layer {
            Layer::Dense(p) => {
                w.write_all(&[TAG_DENSE])?;
                w.write_all(&(p.fan_in() as u64).to_le_bytes())?;
                w.write_all(&(p.fan_out() as u64).to_le_bytes())?;
                for v in p.weight.data().iter().chain(&p.bias) {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            Layer::LeakyRelu(s) => {
                w.write_all(&[TAG_LEAKY])?;
                w.write_all(&s.to_le_bytes())?;
            }
            Layer::Dropout(r) => {
                w.write_all(&[TAG_DROPOUT])?;
                w.write_all(&r.to_le_bytes())?;
            }
            Layer::Tanh => w.write_all(&[TAG_TANH])?,
        }
    }
    Ok(())
}

pub fn read_net<R: Read>(r: &mut R) -> Result<NeuralNet> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let input_width = read_dim(r)?;
    let count = read_u32(r)?;
    let mut layers = Vec::with_capacity(count.min(64) as usize);
    for i in 0..count {
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let layer = match tag[0] {
            TAG_DENSE => {
                let fan_in = read_dim(r)?;
                let fan_out = read_dim(r)?;
                let w = read_f64s(r, fan_in * fan_out)?;
                let b = read_f64s(r, fan_out)?;
                Layer::Dense(DenseParams::new(RealMatrix::from_vec(fan_in, fan_out, w)?, b)?)
            }
            TAG_LEAKY => Layer::LeakyRelu(read_f64(r)?),
            TAG_DROPOUT => Layer::Dropout(read_f64(r)?),
            TAG_TANH => Layer::Tanh,
            t => return Err(Error::Checkpoint(format!("layer {i}: unknown tag {t}"))),
        };
        layers.push(layer);
    }
    NeuralNet::from_layers(input_width, layers)
}

pub fn to_bytes(net: &NeuralNet) -> Vec<u8> {
    let mut buf = Vec::new();
    write_net(net, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

pub fn from_bytes(mut bytes: &[u8]) -> Result<NeuralNet> {
    let net = read_net(&mut bytes)?;
    if !bytes.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len())));
    }
    Ok(net)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_dim<R: Read>(r: &mut R) -> Result<usize> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    let v = u64::from_le_bytes(b);
    if v > MAX_DIM {
        return Err(Error::Checkpoint(format!("dimension {v} out of range")));
    }
    Ok(v as usize)
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| read_f64(r)).collect()
}
