//! Persistence, spectral resampling, patch extraction and synthetic scenes.

mod cube_file;
mod manifest;
mod patches;
mod png_export;
mod scene;
mod ssf;

use std::fs;
use std::io::Write;
use std::path::Path;

pub use cube_file::{decode_cube, encode_cube, load_cube, normalize_max, save_cube, CubeFile, CUBE_MAGIC, CUBE_VERSION};
pub use manifest::{DatasetManifest, ManifestEntry, Split};
pub use patches::{extract_patches, patch_windows, Patch, PatchWindow};
pub use png_export::save_mosaic_png;
pub use scene::{generate_scene, SceneParams};
pub use ssf::{make_ssf_bank, spectral_resample, SsfBank, DEFAULT_RANGE_NM};

use crate::error::Result;

/// Writes to a sibling temporary file, syncs it, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}
