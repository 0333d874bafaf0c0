//! Flat binary container for parameter snapshots.
//!
//! Layout: magic `CXL2`, format version (u32 LE), then one record per
//! parameter: name length (u32 LE), name bytes (UTF-8), rank (u32 LE),
//! extents (u64 LE each), payload (f64 LE, row-major). Records run to EOF.
//! Round-trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Array, Parameter};
use crate::error::{CoreError, Result};

const MAGIC: &[u8; 4] = b"CXL2";
const VERSION: u32 = 1;

pub fn write_snapshot_bytes(params: &[Parameter]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for p in params {
        let name = p.name.as_bytes();
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name);
        let value = p.value();
        out.extend_from_slice(&(value.shape().len() as u32).to_le_bytes());
        for &e in value.shape() {
            out.extend_from_slice(&(e as u64).to_le_bytes());
        }
        for &v in value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_snapshot(params: &[Parameter], path: &Path) -> Result<()> {
    let bytes = write_snapshot_bytes(params)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_snapshot_bytes(bytes: &[u8]) -> Result<Vec<(String, Array)>> {
    let mut r = bytes;
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(CoreError::Serialization("bad snapshot magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CoreError::Serialization(format!(
            "unsupported snapshot version {version}"
        )));
    }
    let mut entries = Vec::new();
    while !r.is_empty() {
        let name_len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        read_exact(&mut r, &mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| CoreError::Serialization("non-UTF-8 parameter name".into()))?;
        let rank = read_u32(&mut r)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u64(&mut r)? as usize);
        }
        let count: usize = shape.iter().product();
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            let mut b = [0u8; 8];
            read_exact(&mut r, &mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        entries.push((name, Array::new(shape, data)?));
    }
    Ok(entries)
}

pub fn load_snapshot(path: &Path) -> Result<Vec<(String, Array)>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    read_snapshot_bytes(&bytes)
}

/// Assigns snapshot values onto an existing parameter set by name.
pub fn apply_snapshot(params: &[Parameter], entries: &[(String, Array)]) -> Result<()> {
    for (name, value) in entries {
        let p = params
            .iter()
            .find(|p| &p.name == name)
            .ok_or_else(|| CoreError::Serialization(format!("unknown parameter {name}")))?;
        if p.value().shape() != value.shape() {
            return Err(CoreError::Serialization(format!(
                "shape mismatch for parameter {name}"
            )));
        }
        p.set_value(value.clone());
    }
    Ok(())
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    if r.len() < buf.len() {
        return Err(CoreError::Serialization("truncated snapshot".into()));
    }
    buf.copy_from_slice(&r[..buf.len()]);
    *r = &r[buf.len()..];
    Ok(())
}

fn read_u32(r: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut &[u8]) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}
