//! Flat binary container for camera fingerprints. All integers and floats are little-endian.
//!
//! | offset        | size          | field                                              |
//! |---------------|---------------|----------------------------------------------------|
//! | 0             | 8             | magic `PRNU-FP\0`                                   |
//! | 8             | 4             | format version (u32, currently 1)                  |
//! | 12            | 4             | height (u32)                                       |
//! | 16            | 4             | width (u32)                                        |
//! | 20            | 4             | number of contributing images (u32)                |
//! | 24            | 8·h·w         | fingerprint values, f64, row-major                 |
//! | 24 + 8·h·w    | ⌈h·w/8⌉       | mask bitmap, row-major, bit `i % 8` of byte `i / 8` |
//! | …             | 4             | metadata length `m` (u32)                          |
//! | …             | m             | metadata, UTF-8 JSON object                        |
//!
//! The metadata object carries `camera_id` and `camera_model`; unknown keys are ignored.
//! Nothing may follow the metadata block.

use std::io::{Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::CameraFingerprint;
use crate::error::{Error, Result};

pub const FINGERPRINT_MAGIC: [u8; 8] = *b"PRNU-FP\0";
pub const FINGERPRINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Metadata {
    #[serde(default)]
    camera_id: String,
    #[serde(default)]
    camera_model: String,
}

fn io_err(e: std::io::Error) -> Error {
    match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated fingerprint file".into()),
        _ => Error::io("<stream>", e),
    }
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in u32")))
}

pub fn write_fingerprint<W: Write>(fp: &CameraFingerprint, out: &mut W) -> Result<()> {
    let (h, w) = fp.shape();
    out.write_all(&FINGERPRINT_MAGIC).map_err(io_err)?;
    for v in [
        FINGERPRINT_VERSION,
        to_u32(h, "height")?,
        to_u32(w, "width")?,
        to_u32(fp.n_images(), "image count")?,
    ] {
        out.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    let mut body = Vec::with_capacity(h * w * 8);
    for v in fp.values().iter() {
        body.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&body).map_err(io_err)?;

    let mut bits = vec![0u8; (h * w).div_ceil(8)];
    for (i, &m) in fp.mask().iter().enumerate() {
        if m {
            bits[i / 8] |= 1 << (i % 8);
        }
    }
    out.write_all(&bits).map_err(io_err)?;

    let meta = serde_json::to_vec(&Metadata {
        camera_id: fp.camera_id.clone(),
        camera_model: fp.camera_model.clone(),
    })?;
    out.write_all(&to_u32(meta.len(), "metadata length")?.to_le_bytes())
        .map_err(io_err)?;
    out.write_all(&meta).map_err(io_err)?;
    out.flush().map_err(io_err)
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf).map_err(io_err)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn read_fingerprint<R: Read>(input: &mut R) -> Result<CameraFingerprint> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(io_err)?;
    if magic != FINGERPRINT_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = read_u32(input)?;
    if version != FINGERPRINT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let h = read_u32(input)? as usize;
    let w = read_u32(input)? as usize;
    let n_images = read_u32(input)? as usize;
    let n = h
        .checked_mul(w)
        .filter(|n| *n > 0 && *n <= (1 << 31))
        .ok_or_else(|| Error::Format(format!("implausible shape {h}x{w}")))?;

    let mut body = vec![0u8; n * 8];
    input.read_exact(&mut body).map_err(io_err)?;
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();

    let mut bits = vec![0u8; n.div_ceil(8)];
    input.read_exact(&mut bits).map_err(io_err)?;
    let mask: Vec<bool> = (0..n).map(|i| bits[i / 8] >> (i % 8) & 1 == 1).collect();

    let meta_len = read_u32(input)? as usize;
    let mut meta = vec![0u8; meta_len];
    input.read_exact(&mut meta).map_err(io_err)?;
    let meta: Metadata = serde_json::from_slice(&meta)
        .map_err(|e| Error::Format(format!("metadata block: {e}")))?;

    let mut rest = [0u8; 1];
    if input.read(&mut rest).map_err(io_err)? != 0 {
        return Err(Error::Format("trailing bytes after metadata".into()));
    }

    let values = Array2::from_shape_vec((h, w), values).expect("length checked");
    let mask = Array2::from_shape_vec((h, w), mask).expect("length checked");
    CameraFingerprint::from_parts(values, mask, n_images, meta.camera_id, meta.camera_model)
        .map_err(|e| Error::Format(e.to_string()))
}
