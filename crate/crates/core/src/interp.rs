//! Weighted bilinear (WB) interpolation: per-band normalized convolution of
//! the sparse samples with the separable kernel
//! `k(u, v) = (1 − |u|/r1)(1 − |v|/r2)`, `|u| < r1`, `|v| < r2`.
//!
//! Same-band neighbours sit a whole period apart where the kernel is zero,
//! so sampled pixels are reproduced exactly. Pixels whose window holds no
//! sample of a band (only possible on images smaller than one period) take
//! the nearest same-band sample instead.

use crate::cube::{Cube, Plane};
use crate::real::Real;
use crate::sfa::SfaPattern;

struct Kernel {
    ru: isize,
    rv: isize,
    weights: Vec<f64>,
}

impl Kernel {
    fn new(pattern: &SfaPattern) -> Self {
        let (r1, r2) = (pattern.r1() as isize, pattern.r2() as isize);
        let mut weights = Vec::new();
        for u in -(r1 - 1)..r1 {
            for v in -(r2 - 1)..r2 {
                weights.push((1.0 - u.abs() as f64 / r1 as f64) * (1.0 - v.abs() as f64 / r2 as f64));
            }
        }
        Kernel { ru: r1 - 1, rv: r2 - 1, weights }
    }

    /// Calls `f(q_h, q_w, weight)` for every in-bounds tap around `(h, w)`.
    #[inline]
    fn for_taps(&self, h: usize, w: usize, height: usize, width: usize, mut f: impl FnMut(usize, usize, f64)) {
        let cols = (2 * self.rv + 1) as usize;
        for u in -self.ru..=self.ru {
            let qh = h as isize + u;
            if qh < 0 || qh >= height as isize {
                continue;
            }
            let row = ((u + self.ru) as usize) * cols;
            for v in -self.rv..=self.rv {
                let qw = w as isize + v;
                if qw < 0 || qw >= width as isize {
                    continue;
                }
                f(qh as usize, qw as usize, self.weights[row + (v + self.rv) as usize]);
            }
        }
    }
}

/// Per-band normalizer `M_b ⊛ k`; it does not depend on the mosaic values.
fn denominators<T: Real>(pattern: &SfaPattern, kernel: &Kernel, height: usize, width: usize) -> Cube<T> {
    let mut den = Cube::zeros(pattern.bands(), height, width);
    for h in 0..height {
        for w in 0..width {
            kernel.for_taps(h, w, height, width, |qh, qw, k| {
                let b = pattern.band_at(qh, qw);
                let i = h * width + w;
                den.band_mut(b)[i] += T::of(k);
            });
        }
    }
    den
}

fn nearest_sample(pattern: &SfaPattern, band: usize, h: usize, w: usize, height: usize, width: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, (usize, usize))> = None;
    for qh in 0..height {
        for qw in 0..width {
            if pattern.band_at(qh, qw) != band {
                continue;
            }
            let d = qh.abs_diff(h).pow(2) + qw.abs_diff(w).pow(2);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, (qh, qw)));
            }
        }
    }
    best.map(|(_, q)| q)
}

/// Interpolates every band of `mosaic` independently.
pub fn wb_interpolate<T: Real>(mosaic: &Plane<T>, pattern: &SfaPattern) -> Cube<T> {
    let (height, width) = mosaic.dims();
    let kernel = Kernel::new(pattern);
    let mut out = Cube::zeros(pattern.bands(), height, width);
    let den = denominators::<T>(pattern, &kernel, height, width);
    for h in 0..height {
        for w in 0..width {
            kernel.for_taps(h, w, height, width, |qh, qw, k| {
                let b = pattern.band_at(qh, qw);
                out.band_mut(b)[h * width + w] += T::of(k) * mosaic.get(qh, qw);
            });
        }
    }
    for b in 0..pattern.bands() {
        for h in 0..height {
            for w in 0..width {
                let d = den.get(b, h, w);
                let v = if d > T::zero() {
                    out.get(b, h, w) / d
                } else {
                    nearest_sample(pattern, b, h, w, height, width).map_or(T::zero(), |(qh, qw)| mosaic.get(qh, qw))
                };
                out.set(b, h, w, v);
            }
        }
    }
    out
}

/// Adjoint of [`wb_interpolate`] (the operator is linear in the mosaic).
pub fn wb_adjoint<T: Real>(grad: &Cube<T>, pattern: &SfaPattern) -> Plane<T> {
    let (height, width) = (grad.height(), grad.width());
    let kernel = Kernel::new(pattern);
    let den = denominators::<T>(pattern, &kernel, height, width);
    let mut out = Plane::zeros(height, width);
    // Scale by the normalizer once, then scatter through the taps.
    let mut scaled = grad.clone();
    for b in 0..pattern.bands() {
        for h in 0..height {
            for w in 0..width {
                let d = den.get(b, h, w);
                if d > T::zero() {
                    scaled.set(b, h, w, grad.get(b, h, w) / d);
                } else {
                    scaled.set(b, h, w, T::zero());
                    if let Some((qh, qw)) = nearest_sample(pattern, b, h, w, height, width) {
                        let v = out.get(qh, qw) + grad.get(b, h, w);
                        out.set(qh, qw, v);
                    }
                }
            }
        }
    }
    for h in 0..height {
        for w in 0..width {
            let mut acc = T::zero();
            kernel.for_taps(h, w, height, width, |qh, qw, k| {
                // tap q of output pixel (h,w) ↔ tap (h,w) of output pixel q; k is symmetric
                let b = pattern.band_at(h, w);
                acc += T::of(k) * scaled.get(b, qh, qw);
            });
            let v = out.get(h, w) + acc;
            out.set(h, w, v);
        }
    }
    out
}
