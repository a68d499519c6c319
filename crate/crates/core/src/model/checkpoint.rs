//! Binary checkpoint format.
//!
//! ```text
//! magic   b"SPMKCKPT"
//! version u32
//! config  u32 length + JSON bytes
//! count   u32
//! tensor  u32 name length + name, u64 rows, u64 cols, rows*cols f64
//! ```
//!
//! All integers and floats are little-endian; tensors appear in declaration
//! order.

use std::io::{Read, Write};
use std::path::Path;

use super::config::EncoderConfig;
use super::params::ModelParams;
use super::tensor::Mat;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SPMKCKPT";
const VERSION: u32 = 1;

fn put_u32<W: Write>(w: &mut W, x: u32) -> std::io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn put_u64<W: Write>(w: &mut W, x: u64) -> std::io::Result<()> {
    w.write_all(&x.to_le_bytes())
}

fn get<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(b)
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(get::<4, R>(r)?))
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(get::<8, R>(r)?))
}

fn get_bytes<R: Read>(r: &mut R, n: usize) -> Result<Vec<u8>> {
    let mut b = vec![0u8; n];
    r.read_exact(&mut b)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(b)
}

pub fn write_checkpoint<W: Write>(params: &ModelParams, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(&mut w, VERSION)?;
    let cfg = serde_json::to_vec(&params.config).expect("config serializes");
    put_u32(&mut w, cfg.len() as u32)?;
    w.write_all(&cfg)?;
    put_u32(&mut w, params.tensors.len() as u32)?;
    for (name, t) in params.names.iter().zip(&params.tensors) {
        put_u32(&mut w, name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        put_u64(&mut w, t.rows as u64)?;
        put_u64(&mut w, t.cols as u64)?;
        for x in &t.data {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ModelParams> {
    if &get::<8, R>(&mut r)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = get_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let n = get_u32(&mut r)? as usize;
    let config: EncoderConfig = serde_json::from_slice(&get_bytes(&mut r, n)?)
        .map_err(|e| Error::Checkpoint(format!("bad config header: {e}")))?;
    let mut params = ModelParams::init(&config, 0)?;
    let expected = ModelParams::expected_shapes(&config);
    let count = get_u32(&mut r)? as usize;
    if count != expected.len() {
        return Err(Error::Checkpoint(format!("expected {} tensors, found {count}", expected.len())));
    }
    for (i, (name, rows, cols)) in expected.into_iter().enumerate() {
        let len = get_u32(&mut r)? as usize;
        let found = String::from_utf8(get_bytes(&mut r, len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        let (fr, fc) = (get_u64(&mut r)? as usize, get_u64(&mut r)? as usize);
        if found != name || (fr, fc) != (rows, cols) {
            return Err(Error::Checkpoint(format!(
                "tensor {i}: expected {name} {rows}x{cols}, found {found} {fr}x{fc}"
            )));
        }
        let raw = get_bytes(&mut r, rows * cols * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        params.tensors[i] = Mat::from_vec(rows, cols, data);
    }
    Ok(params)
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    write_checkpoint(params, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}
