use std::path::Path;

use crate::cube::Plane;
use crate::error::{Error, Result};
use crate::real::Real;

use super::write_atomic;

/// Writes a mosaic as a 16-bit grayscale PNG, mapping [0, 1] to [0, 65535].
pub fn save_mosaic_png<T: Real>(mosaic: &Plane<T>, path: &Path) -> Result<()> {
    let (h, w) = mosaic.dims();
    let mut bytes = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut bytes, w as u32, h as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut writer = enc.write_header().map_err(|e| Error::format(path, e.to_string()))?;
        let data: Vec<u8> = mosaic
            .as_slice()
            .iter()
            .flat_map(|v| ((v.f64().clamp(0.0, 1.0) * 65535.0).round() as u16).to_be_bytes())
            .collect();
        writer.write_image_data(&data).map_err(|e| Error::format(path, e.to_string()))?;
    }
    write_atomic(path, &bytes)
}
