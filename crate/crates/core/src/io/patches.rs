use rand::Rng;

use crate::cube::Plane;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::sfa::SfaPattern;

/// Patch placement within a mosaic. Offsets are multiples of the SFA period.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchWindow {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Clone, Debug)]
pub struct Patch<T> {
    pub window: PatchWindow,
    pub mosaic: Plane<T>,
}

/// Draws `count` period-aligned windows. `size` is snapped down to whole
/// periods and clipped to the image.
pub fn patch_windows<R: Rng + ?Sized>(
    height: usize,
    width: usize,
    size: usize,
    count: usize,
    pattern: &SfaPattern,
    rng: &mut R,
) -> Result<Vec<PatchWindow>> {
    let (r1, r2) = pattern.period();
    let (ih, iw) = pattern.snap_down(height, width);
    let (ph, pw) = pattern.snap_down(size.min(ih), size.min(iw));
    if ph == 0 || pw == 0 {
        return Err(Error::Shape(format!(
            "patch size {size} on a {height}×{width} mosaic holds no whole {r1}×{r2} period"
        )));
    }
    let slots_h = (ih - ph) / r1;
    let slots_w = (iw - pw) / r2;
    Ok((0..count)
        .map(|_| PatchWindow {
            top: r1 * rng.random_range(0..=slots_h),
            left: r2 * rng.random_range(0..=slots_w),
            height: ph,
            width: pw,
        })
        .collect())
}

pub fn extract_patches<T: Real, R: Rng + ?Sized>(
    mosaic: &Plane<T>,
    size: usize,
    count: usize,
    pattern: &SfaPattern,
    rng: &mut R,
) -> Result<Vec<Patch<T>>> {
    patch_windows(mosaic.height(), mosaic.width(), size, count, pattern, rng)?
        .into_iter()
        .map(|window| {
            Ok(Patch { window, mosaic: mosaic.crop(window.top, window.left, window.height, window.width)? })
        })
        .collect()
}
