//! Minimal cube container.
//!
//! A text header of `key value` lines terminated by `end`, followed by the
//! raw float32 little-endian payload, band-major and row-major within a
//! band:
//!
//! ```text
//! USDCUBE 1
//! height 128
//! width 128
//! bands 16
//! dtype float32
//! byteorder little
//! wavelengths 609.4 628.1 ...   (optional, nm)
//! scale 1534.0                  (optional, stored = original / scale)
//! end
//! ```

use std::path::Path;

use crate::cube::Cube;
use crate::error::{Error, Result};
use crate::real::Real;

use super::write_atomic;

pub const CUBE_MAGIC: &str = "USDCUBE";
pub const CUBE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct CubeFile {
    pub cube: Cube<f32>,
    pub wavelengths: Option<Vec<f64>>,
    /// Factor the stored values were divided by, when normalized.
    pub scale: Option<f64>,
}

impl CubeFile {
    pub fn new(cube: Cube<f32>) -> Self {
        CubeFile { cube, wavelengths: None, scale: None }
    }
}

/// Divides by the cube maximum so values lie in [0, 1]; returns the scale.
pub fn normalize_max<T: Real>(cube: &Cube<T>) -> (Cube<T>, f64) {
    let max = cube.as_slice().iter().fold(0.0f64, |m, v| m.max(v.f64()));
    if max <= 0.0 {
        return (cube.clone(), 1.0);
    }
    (cube.map(|v| T::of(v.f64() / max)), max)
}

pub fn encode_cube(file: &CubeFile) -> Vec<u8> {
    let (b, h, w) = file.cube.dims();
    let mut header = format!("{CUBE_MAGIC} {CUBE_VERSION}\nheight {h}\nwidth {w}\nbands {b}\ndtype float32\nbyteorder little\n");
    if let Some(wl) = &file.wavelengths {
        let list: Vec<String> = wl.iter().map(|v| v.to_string()).collect();
        header.push_str(&format!("wavelengths {}\n", list.join(" ")));
    }
    if let Some(s) = file.scale {
        header.push_str(&format!("scale {s}\n"));
    }
    header.push_str("end\n");
    let mut out = header.into_bytes();
    out.reserve(file.cube.as_slice().len() * 4);
    for &v in file.cube.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_cube(bytes: &[u8], origin: &Path) -> Result<CubeFile> {
    let bad = |m: String| Error::format(origin, m);
    let mut pos = 0usize;
    let mut next_line = || -> Result<&str> {
        let rest = &bytes[pos..];
        let end = rest.iter().position(|&c| c == b'\n').ok_or_else(|| bad("header is not terminated".into()))?;
        pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| bad("header is not UTF-8".into()))
    };

    let first = next_line()?;
    let mut parts = first.split_whitespace();
    if parts.next() != Some(CUBE_MAGIC) {
        return Err(bad("bad magic: not a cube file".into()));
    }
    let version: u32 = parts.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("missing version".into()))?;
    if version != CUBE_VERSION {
        return Err(bad(format!("unsupported cube version {version}")));
    }

    let (mut height, mut width, mut bands) = (None, None, None);
    let (mut wavelengths, mut scale) = (None, None);
    loop {
        let line = next_line()?;
        let (key, value) = line.split_once(' ').unwrap_or((line, ""));
        let num = |v: &str| v.trim().parse::<usize>().map_err(|_| bad(format!("bad value for {key}: {v}")));
        match key {
            "end" => break,
            "height" => height = Some(num(value)?),
            "width" => width = Some(num(value)?),
            "bands" => bands = Some(num(value)?),
            "dtype" if value.trim() == "float32" => {}
            "dtype" => return Err(bad(format!("unsupported dtype {} (expected float32)", value.trim()))),
            "byteorder" if value.trim() == "little" => {}
            "byteorder" => {
                return Err(bad(format!("byte order {} is not supported; payload must be little-endian", value.trim())))
            }
            "wavelengths" => {
                let wl: std::result::Result<Vec<f64>, _> = value.split_whitespace().map(str::parse).collect();
                wavelengths = Some(wl.map_err(|_| bad("bad wavelength list".into()))?);
            }
            "scale" => scale = Some(value.trim().parse::<f64>().map_err(|_| bad("bad scale".into()))?),
            other => return Err(bad(format!("unknown header key {other}"))),
        }
    }
    let (h, w, b) = match (height, width, bands) {
        (Some(h), Some(w), Some(b)) => (h, w, b),
        _ => return Err(bad("header must give height, width and bands".into())),
    };
    if let Some(wl) = &wavelengths {
        if wl.len() != b {
            return Err(bad(format!("{} wavelengths for {b} bands", wl.len())));
        }
    }
    let payload = &bytes[pos..];
    let expected = h * w * b * 4;
    if payload.len() != expected {
        return Err(bad(format!(
            "payload is {} bytes but {h}×{w}×{b} float32 needs {expected}",
            payload.len()
        )));
    }
    let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    Ok(CubeFile { cube: Cube::from_vec(b, h, w, data)?, wavelengths, scale })
}

pub fn save_cube(path: &Path, file: &CubeFile) -> Result<()> {
    write_atomic(path, &encode_cube(file))
}

pub fn load_cube(path: &Path) -> Result<CubeFile> {
    decode_cube(&std::fs::read(path)?, path)
}
