use crate::cube::Plane;
use crate::real::Real;

/// Splits a band into its r1·r2 phase sub-images. Sub-image `p·r2 + q`
/// collects pixels `(p + r1·m, q + r2·n)`. Trailing rows/columns beyond the
/// last whole period are dropped.
pub fn inverse_pixel_shuffle<T: Real>(band: &Plane<T>, r1: usize, r2: usize) -> Vec<Plane<T>> {
    let (sh, sw) = (band.height() / r1, band.width() / r2);
    let mut subs = Vec::with_capacity(r1 * r2);
    for p in 0..r1 {
        for q in 0..r2 {
            subs.push(Plane::from_fn(sh, sw, |m, n| band.get(p + r1 * m, q + r2 * n)));
        }
    }
    subs
}

/// Inverse of [`inverse_pixel_shuffle`]: interleaves r1·r2 equally sized
/// sub-images back into one plane.
pub fn pixel_shuffle<T: Real>(subs: &[Plane<T>], r1: usize, r2: usize) -> Plane<T> {
    assert_eq!(subs.len(), r1 * r2, "need r1·r2 sub-images");
    let (sh, sw) = subs[0].dims();
    Plane::from_fn(sh * r1, sw * r2, |h, w| subs[(h % r1) * r2 + w % r2].get(h / r1, w / r2))
}

/// Global mean of each phase sub-image, computed directly from a row-major
/// `height × width` slice without materializing the sub-images. Sizes must
/// be period multiples.
pub fn phase_means<T: Real>(band: &[T], height: usize, width: usize, r1: usize, r2: usize) -> Vec<T> {
    let mut sums = vec![T::zero(); r1 * r2];
    for h in 0..height {
        let row = &band[h * width..(h + 1) * width];
        let base = (h % r1) * r2;
        for (w, &v) in row.iter().enumerate() {
            sums[base + w % r2] += v;
        }
    }
    let count = T::of(((height / r1) * (width / r2)) as f64);
    sums.iter_mut().for_each(|s| *s /= count);
    sums
}
