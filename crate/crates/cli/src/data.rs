//! Turning cube files into training and validation samples.
//!
//! A file whose band count matches the pattern is a ground-truth cube; a
//! single-band file is a raw mosaic. Both are cropped to whole periods.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use usd_core::io::{load_cube, DatasetManifest, Split};
use usd_core::sfa::{mosaic_sample, SfaPattern};
use usd_core::train::Sample;
use usd_core::{Cube, Plane};

pub enum Loaded {
    Mosaic(Plane<f32>),
    Cube(Cube<f32>),
}

impl Loaded {
    pub fn mosaic(&self, pattern: &SfaPattern) -> Result<Plane<f32>> {
        Ok(match self {
            Loaded::Mosaic(m) => m.clone(),
            Loaded::Cube(c) => mosaic_sample(c, pattern)?,
        })
    }

    pub fn cube(&self) -> Option<&Cube<f32>> {
        match self {
            Loaded::Cube(c) => Some(c),
            Loaded::Mosaic(_) => None,
        }
    }
}

pub fn load_input(path: &Path, pattern: &SfaPattern) -> Result<Loaded> {
    let file = load_cube(path).with_context(|| format!("loading {}", path.display()))?;
    let cube = file.cube;
    let (bands, h, w) = cube.dims();
    let (ch, cw) = pattern.snap_down(h, w);
    if ch == 0 || cw == 0 {
        bail!("{}: {h}×{w} image is smaller than one {}×{} period", path.display(), pattern.r1(), pattern.r2());
    }
    if (ch, cw) != (h, w) {
        log::warn!("{}: cropping {h}×{w} to {ch}×{cw} to hold whole periods", path.display());
    }
    let cube = cube.crop(0, 0, ch, cw)?;
    if bands == pattern.bands() {
        Ok(Loaded::Cube(cube))
    } else if bands == 1 {
        Ok(Loaded::Mosaic(cube.band_plane(0)))
    } else {
        bail!("{}: {bands} bands fits neither a mosaic (1) nor the pattern ({})", path.display(), pattern.bands())
    }
}

/// Training and validation file lists from the manifest plus explicit paths.
pub fn split_files(manifest: Option<&Path>, train: &[PathBuf], val: &[PathBuf]) -> Result<(Vec<PathBuf>, Vec<PathBuf>)> {
    let mut t = Vec::new();
    let mut v = Vec::new();
    if let Some(m) = manifest {
        let m = DatasetManifest::load(m).with_context(|| format!("loading manifest {}", m.display()))?;
        t.extend(m.paths(Split::Train).map(Path::to_path_buf));
        v.extend(m.paths(Split::Val).map(Path::to_path_buf));
    }
    t.extend(train.iter().cloned());
    v.extend(val.iter().cloned());
    Ok((t, v))
}

/// Training samples carry ground truth only when `supervised`.
pub fn training_samples(files: &[PathBuf], pattern: &SfaPattern, supervised: bool) -> Result<Vec<Sample<f32>>> {
    files
        .iter()
        .map(|p| {
            let loaded = load_input(p, pattern)?;
            let target = if supervised {
                Some(loaded.cube().cloned().with_context(|| format!("{}: supervised training needs a cube", p.display()))?)
            } else {
                None
            };
            Ok(Sample { mosaic: loaded.mosaic(pattern)?, target })
        })
        .collect()
}

pub fn validation_samples(files: &[PathBuf], pattern: &SfaPattern) -> Result<Vec<Sample<f64>>> {
    files
        .iter()
        .map(|p| {
            let loaded = load_input(p, pattern)?;
            Ok(Sample { mosaic: loaded.mosaic(pattern)?.cast(), target: loaded.cube().map(|c| c.cast()) })
        })
        .collect()
}
