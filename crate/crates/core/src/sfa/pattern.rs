use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A periodic r1×r2 tile of band indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PatternFile", into = "PatternFile")]
pub struct SfaPattern {
    r1: usize,
    r2: usize,
    bands: usize,
    layout: Vec<usize>,
}

/// On-disk form: `r1`, `r2`, `bands` and a row-per-line `layout` grid.
#[derive(Serialize, Deserialize)]
struct PatternFile {
    r1: usize,
    r2: usize,
    bands: usize,
    layout: Vec<Vec<usize>>,
}

impl TryFrom<PatternFile> for SfaPattern {
    type Error = Error;

    fn try_from(f: PatternFile) -> Result<Self> {
        if f.layout.len() != f.r1 || f.layout.iter().any(|row| row.len() != f.r2) {
            return Err(Error::Pattern(format!("layout grid must be {}×{}", f.r1, f.r2)));
        }
        SfaPattern::new(f.r1, f.r2, f.bands, f.layout.concat())
    }
}

impl From<SfaPattern> for PatternFile {
    fn from(p: SfaPattern) -> Self {
        PatternFile { r1: p.r1, r2: p.r2, bands: p.bands, layout: p.layout.chunks(p.r2).map(<[usize]>::to_vec).collect() }
    }
}

impl SfaPattern {
    /// `layout` is row-major, `r1·r2` entries, each in `[0, bands)`.
    pub fn new(r1: usize, r2: usize, bands: usize, layout: Vec<usize>) -> Result<Self> {
        if r1 == 0 || r2 == 0 || bands == 0 {
            return Err(Error::Pattern("period and band count must be positive".into()));
        }
        if layout.len() != r1 * r2 {
            return Err(Error::Pattern(format!("{} layout entries for a {r1}×{r2} period", layout.len())));
        }
        if let Some(&b) = layout.iter().find(|&&b| b >= bands) {
            return Err(Error::Pattern(format!("band index {b} out of range for {bands} bands")));
        }
        Ok(SfaPattern { r1, r2, bands, layout })
    }

    /// Non-redundant pattern with bands numbered in row-major order.
    pub fn row_major(r1: usize, r2: usize) -> Self {
        SfaPattern { r1, r2, bands: r1 * r2, layout: (0..r1 * r2).collect() }
    }

    #[inline]
    pub fn r1(&self) -> usize {
        self.r1
    }
    #[inline]
    pub fn r2(&self) -> usize {
        self.r2
    }
    #[inline]
    pub fn bands(&self) -> usize {
        self.bands
    }
    #[inline]
    pub fn period(&self) -> (usize, usize) {
        (self.r1, self.r2)
    }
    #[inline]
    pub fn phases(&self) -> usize {
        self.r1 * self.r2
    }
    pub fn layout(&self) -> &[usize] {
        &self.layout
    }

    /// Band sampled at pixel `(h, w)`.
    #[inline]
    pub fn band_at(&self, h: usize, w: usize) -> usize {
        self.layout[self.phase_of(h, w)]
    }

    /// Row-major index of the pixel's position within the tile.
    #[inline]
    pub fn phase_of(&self, h: usize, w: usize) -> usize {
        (h % self.r1) * self.r2 + w % self.r2
    }

    /// True when every band appears exactly once per tile.
    pub fn is_non_redundant(&self) -> bool {
        if self.bands != self.r1 * self.r2 {
            return false;
        }
        let mut seen = vec![false; self.bands];
        self.layout.iter().all(|&b| !std::mem::replace(&mut seen[b], true))
    }

    /// Largest `(h, w)` not exceeding the input that is a whole number of periods.
    pub fn snap_down(&self, height: usize, width: usize) -> (usize, usize) {
        (height - height % self.r1, width - width % self.r2)
    }

    pub fn check_aligned(&self, height: usize, width: usize) -> Result<()> {
        if height == 0 || width == 0 || height % self.r1 != 0 || width % self.r2 != 0 {
            return Err(Error::Shape(format!(
                "{height}×{width} is not a positive multiple of the {}×{} period",
                self.r1, self.r2
            )));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Pattern(e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("pattern serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_toml().as_bytes())
    }
}
