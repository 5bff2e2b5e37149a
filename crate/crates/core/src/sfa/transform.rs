use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cube::Cube;
use crate::error::{Error, Result};
use crate::real::Real;

use super::SfaPattern;

/// Scale factors drawn for [`TransformSpec::Resize`].
pub const RESIZE_RANGE: (f64, f64) = (0.5, 2.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlipAxis {
    /// Mirror left-right.
    Horizontal,
    /// Mirror top-bottom.
    Vertical,
}

/// A geometric transform applied identically to every band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TransformSpec {
    /// Circular translation by `rows ∈ [1, r1]`, `cols ∈ [1, r2]`.
    Shift { rows: usize, cols: usize },
    Flip { axis: FlipAxis },
    /// Counter-clockwise rotation by `quarter_turns · 90°`, `quarter_turns ∈ {1, 2, 3}`.
    Rotate { quarter_turns: u8 },
    /// Bilinear rescale by `scale ∈ [0.5, 2]`, then crop to whole periods.
    Resize { scale: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransformKind {
    Shift,
    Flip,
    Rotate,
    Resize,
}

impl TransformKind {
    pub const ALL: [TransformKind; 4] =
        [TransformKind::Shift, TransformKind::Flip, TransformKind::Rotate, TransformKind::Resize];
}

impl TransformSpec {
    pub fn kind(&self) -> TransformKind {
        match self {
            TransformSpec::Shift { .. } => TransformKind::Shift,
            TransformSpec::Flip { .. } => TransformKind::Flip,
            TransformSpec::Rotate { .. } => TransformKind::Rotate,
            TransformSpec::Resize { .. } => TransformKind::Resize,
        }
    }

    pub fn validate(&self, pattern: &SfaPattern) -> Result<()> {
        match *self {
            TransformSpec::Shift { rows, cols } => {
                if !(1..=pattern.r1()).contains(&rows) || !(1..=pattern.r2()).contains(&cols) {
                    return Err(Error::Transform(format!(
                        "shift ({rows}, {cols}) outside [1, {}]×[1, {}]",
                        pattern.r1(),
                        pattern.r2()
                    )));
                }
            }
            TransformSpec::Flip { .. } => {}
            TransformSpec::Rotate { quarter_turns } => {
                if !(1..=3).contains(&quarter_turns) {
                    return Err(Error::Transform(format!("rotation by {quarter_turns} quarter turns")));
                }
            }
            TransformSpec::Resize { scale } => {
                if !(RESIZE_RANGE.0..=RESIZE_RANGE.1).contains(&scale) {
                    return Err(Error::Transform(format!("resize scale {scale} outside [0.5, 2]")));
                }
            }
        }
        Ok(())
    }
}

/// Selection weights over shift, flip, rotate, resize.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformPolicy {
    weights: [f64; 4],
}

impl Default for TransformPolicy {
    fn default() -> Self {
        Self::mixed()
    }
}

impl TransformPolicy {
    pub fn new(shift: f64, flip: f64, rotate: f64, resize: f64) -> Result<Self> {
        let weights = [shift, flip, rotate, resize];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config(format!("invalid transform weights {weights:?}")));
        }
        Ok(TransformPolicy { weights })
    }

    /// Uniform over the four kinds.
    pub fn mixed() -> Self {
        TransformPolicy { weights: [1.0; 4] }
    }

    pub fn shift_only() -> Self {
        TransformPolicy { weights: [1.0, 0.0, 0.0, 0.0] }
    }

    pub fn weights(&self) -> [f64; 4] {
        self.weights
    }
}

/// Draws a transform under `policy`. Deterministic for a seeded `rng`.
pub fn random_transform<R: Rng + ?Sized>(rng: &mut R, pattern: &SfaPattern, policy: &TransformPolicy) -> TransformSpec {
    let index = WeightedIndex::new(policy.weights).expect("policy weights validated");
    match TransformKind::ALL[index.sample(rng)] {
        TransformKind::Shift => TransformSpec::Shift {
            rows: rng.random_range(1..=pattern.r1()),
            cols: rng.random_range(1..=pattern.r2()),
        },
        TransformKind::Flip => TransformSpec::Flip {
            axis: if rng.random_bool(0.5) { FlipAxis::Horizontal } else { FlipAxis::Vertical },
        },
        TransformKind::Rotate => TransformSpec::Rotate { quarter_turns: rng.random_range(1..=3) },
        TransformKind::Resize => TransformSpec::Resize { scale: rng.random_range(RESIZE_RANGE.0..=RESIZE_RANGE.1) },
    }
}

fn resized_len(len: usize, scale: f64) -> usize {
    ((len as f64 * scale).round() as usize).max(1)
}

/// Output `(height, width)` of `spec` applied to an input of the given size.
pub fn transformed_dims(spec: &TransformSpec, height: usize, width: usize, pattern: &SfaPattern) -> Result<(usize, usize)> {
    let raw = match *spec {
        TransformSpec::Shift { .. } | TransformSpec::Flip { .. } => return Ok((height, width)),
        TransformSpec::Rotate { quarter_turns: 2 } => (height, width),
        TransformSpec::Rotate { .. } => (width, height),
        TransformSpec::Resize { scale } => (resized_len(height, scale), resized_len(width, scale)),
    };
    let (h, w) = pattern.snap_down(raw.0, raw.1);
    if h == 0 || w == 0 {
        return Err(Error::Transform(format!(
            "{spec:?} maps {height}×{width} below one {}×{} period",
            pattern.r1(),
            pattern.r2()
        )));
    }
    Ok((h, w))
}

/// Up to four weighted source taps per output pixel.
struct Taps {
    out_h: usize,
    out_w: usize,
    per_pixel: usize,
    idx: Vec<usize>,
    weight: Vec<f64>,
}

fn build_taps(spec: &TransformSpec, in_h: usize, in_w: usize, pattern: &SfaPattern) -> Result<Taps> {
    spec.validate(pattern)?;
    let (out_h, out_w) = transformed_dims(spec, in_h, in_w, pattern)?;
    let n = out_h * out_w;
    let at = |h: usize, w: usize| h * in_w + w;
    let mut taps = Taps { out_h, out_w, per_pixel: 1, idx: Vec::with_capacity(n), weight: Vec::new() };
    match *spec {
        TransformSpec::Shift { rows, cols } => {
            for h in 0..out_h {
                for w in 0..out_w {
                    taps.idx.push(at((h + in_h - rows % in_h) % in_h, (w + in_w - cols % in_w) % in_w));
                }
            }
        }
        TransformSpec::Flip { axis } => {
            for h in 0..out_h {
                for w in 0..out_w {
                    taps.idx.push(match axis {
                        FlipAxis::Horizontal => at(h, in_w - 1 - w),
                        FlipAxis::Vertical => at(in_h - 1 - h, w),
                    });
                }
            }
        }
        TransformSpec::Rotate { quarter_turns } => {
            for h in 0..out_h {
                for w in 0..out_w {
                    taps.idx.push(match quarter_turns {
                        1 => at(w, in_w - 1 - h),
                        2 => at(in_h - 1 - h, in_w - 1 - w),
                        _ => at(in_h - 1 - w, h),
                    });
                }
            }
        }
        TransformSpec::Resize { scale } => {
            // Half-pixel-centre bilinear sampling onto the rescaled grid; the
            // crop to whole periods keeps the top-left corner.
            let (full_h, full_w) = (resized_len(in_h, scale), resized_len(in_w, scale));
            let (fy, fx) = (in_h as f64 / full_h as f64, in_w as f64 / full_w as f64);
            let axis = |o: usize, f: f64, len: usize| {
                let s = ((o as f64 + 0.5) * f - 0.5).clamp(0.0, (len - 1) as f64);
                let lo = s.floor() as usize;
                let hi = (lo + 1).min(len - 1);
                (lo, hi, s - lo as f64)
            };
            taps.per_pixel = 4;
            taps.idx.reserve(3 * n);
            taps.weight.reserve(4 * n);
            for h in 0..out_h {
                let (y0, y1, ty) = axis(h, fy, in_h);
                for w in 0..out_w {
                    let (x0, x1, tx) = axis(w, fx, in_w);
                    taps.idx.extend_from_slice(&[at(y0, x0), at(y0, x1), at(y1, x0), at(y1, x1)]);
                    taps.weight.extend_from_slice(&[
                        (1.0 - ty) * (1.0 - tx),
                        (1.0 - ty) * tx,
                        ty * (1.0 - tx),
                        ty * tx,
                    ]);
                }
            }
        }
    }
    Ok(taps)
}

/// Applies `spec` to every band of `cube`. Shift is circular; flips and
/// rotations are exact index permutations (followed by a crop to whole
/// periods when a rotation swaps non-conforming sides).
pub fn apply_transform<T: Real>(cube: &Cube<T>, spec: &TransformSpec, pattern: &SfaPattern) -> Result<Cube<T>> {
    let taps = build_taps(spec, cube.height(), cube.width(), pattern)?;
    let mut out = Cube::zeros(cube.bands(), taps.out_h, taps.out_w);
    for b in 0..cube.bands() {
        let src = cube.band(b);
        let dst = out.band_mut(b);
        if taps.per_pixel == 1 {
            for (d, &i) in dst.iter_mut().zip(&taps.idx) {
                *d = src[i];
            }
        } else {
            for (p, d) in dst.iter_mut().enumerate() {
                let mut acc = T::zero();
                for t in 4 * p..4 * p + 4 {
                    acc += T::of(taps.weight[t]) * src[taps.idx[t]];
                }
                *d = acc;
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`apply_transform`]: maps a gradient on the transformed cube
/// back onto an input of size `in_height × in_width`.
pub fn apply_transform_adjoint<T: Real>(
    grad: &Cube<T>,
    spec: &TransformSpec,
    pattern: &SfaPattern,
    in_height: usize,
    in_width: usize,
) -> Result<Cube<T>> {
    let taps = build_taps(spec, in_height, in_width, pattern)?;
    if (grad.height(), grad.width()) != (taps.out_h, taps.out_w) {
        return Err(Error::Shape(format!(
            "gradient is {}×{}, transform output is {}×{}",
            grad.height(),
            grad.width(),
            taps.out_h,
            taps.out_w
        )));
    }
    let mut out = Cube::zeros(grad.bands(), in_height, in_width);
    for b in 0..grad.bands() {
        let g = grad.band(b);
        let dst = out.band_mut(b);
        if taps.per_pixel == 1 {
            for (&gv, &i) in g.iter().zip(&taps.idx) {
                dst[i] += gv;
            }
        } else {
            for (p, &gv) in g.iter().enumerate() {
                for t in 4 * p..4 * p + 4 {
                    dst[taps.idx[t]] += T::of(taps.weight[t]) * gv;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sfa::mosaic_sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_cube(bands: usize, h: usize, w: usize, seed: u64) -> Cube<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Cube::from_fn(bands, h, w, |_, _, _| rng.random::<f64>())
    }

    fn sorted(c: &Cube<f64>) -> Vec<f64> {
        let mut v = c.as_slice().to_vec();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn flips_are_involutions() {
        let p = SfaPattern::row_major(2, 2);
        let c = random_cube(4, 6, 8, 1);
        for axis in [FlipAxis::Horizontal, FlipAxis::Vertical] {
            let spec = TransformSpec::Flip { axis };
            let twice = apply_transform(&apply_transform(&c, &spec, &p).unwrap(), &spec, &p).unwrap();
            assert_eq!(twice, c);
        }
    }

    #[test]
    fn four_quarter_turns_are_identity() {
        let p = SfaPattern::row_major(2, 2);
        let c = random_cube(4, 6, 8, 2);
        let spec = TransformSpec::Rotate { quarter_turns: 1 };
        let mut r = c.clone();
        for _ in 0..4 {
            r = apply_transform(&r, &spec, &p).unwrap();
        }
        assert_eq!(r, c);
        let once = apply_transform(&c, &spec, &p).unwrap();
        assert_eq!((once.height(), once.width()), (8, 6));
        // counter-clockwise: the top-right corner moves to the top-left
        assert_eq!(once.get(0, 0, 0), c.get(0, 0, 7));
    }

    #[test]
    fn shift_by_period_commutes_with_sampling() {
        let p = SfaPattern::row_major(3, 2);
        let c = random_cube(6, 9, 8, 3);
        let spec = TransformSpec::Shift { rows: 3, cols: 2 };
        let y_shifted = mosaic_sample(&apply_transform(&c, &spec, &p).unwrap(), &p).unwrap();
        let y = mosaic_sample(&c, &p).unwrap();
        for h in 0..9 {
            for w in 0..8 {
                assert_eq!(y_shifted.get(h, w), y.get((h + 9 - 3) % 9, (w + 8 - 2) % 8));
            }
        }
    }

    #[test]
    fn permutations_preserve_values() {
        let p = SfaPattern::row_major(2, 2);
        let c = random_cube(4, 6, 6, 4);
        for spec in [
            TransformSpec::Shift { rows: 1, cols: 2 },
            TransformSpec::Flip { axis: FlipAxis::Vertical },
            TransformSpec::Rotate { quarter_turns: 3 },
        ] {
            assert_eq!(sorted(&apply_transform(&c, &spec, &p).unwrap()), sorted(&c));
        }
    }

    #[test]
    fn rotation_crops_to_period_multiples() {
        let p = SfaPattern::row_major(2, 3);
        let c = random_cube(6, 6, 6, 5);
        let r = apply_transform(&c, &TransformSpec::Rotate { quarter_turns: 1 }, &p).unwrap();
        assert_eq!((r.height(), r.width()), (6, 6));
        let c = random_cube(6, 4, 6, 5);
        let r = apply_transform(&c, &TransformSpec::Rotate { quarter_turns: 1 }, &p).unwrap();
        assert_eq!((r.height(), r.width()), (6, 3));
    }

    #[test]
    fn resize_sizes_and_range() {
        let p = SfaPattern::row_major(4, 4);
        let c = random_cube(16, 16, 16, 6);
        let up = apply_transform(&c, &TransformSpec::Resize { scale: 2.0 }, &p).unwrap();
        assert_eq!((up.height(), up.width()), (32, 32));
        let odd = apply_transform(&c, &TransformSpec::Resize { scale: 0.7 }, &p).unwrap();
        assert_eq!((odd.height(), odd.width()), (8, 8));
        let (lo, hi) = c.as_slice().iter().fold((1.0f64, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(odd.as_slice().iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));

        let small = random_cube(16, 4, 4, 6);
        assert!(apply_transform(&small, &TransformSpec::Resize { scale: 0.5 }, &p).is_err());
        assert!(apply_transform(&c, &TransformSpec::Resize { scale: 2.5 }, &p).is_err());
    }

    #[test]
    fn constant_cube_is_resize_invariant() {
        let p = SfaPattern::row_major(2, 2);
        let c = Cube::<f64>::filled(4, 10, 10, 0.4);
        let r = apply_transform(&c, &TransformSpec::Resize { scale: 1.37 }, &p).unwrap();
        assert!(r.as_slice().iter().all(|&v| (v - 0.4).abs() < 1e-12));
    }

    #[test]
    fn invalid_specs_rejected() {
        let p = SfaPattern::row_major(2, 2);
        let c = random_cube(4, 4, 4, 7);
        assert!(apply_transform(&c, &TransformSpec::Shift { rows: 0, cols: 1 }, &p).is_err());
        assert!(apply_transform(&c, &TransformSpec::Shift { rows: 1, cols: 3 }, &p).is_err());
        assert!(apply_transform(&c, &TransformSpec::Rotate { quarter_turns: 4 }, &p).is_err());
    }

    /// <T x, g> = <x, T* g> for every kind of transform.
    #[test]
    fn adjoint_satisfies_dot_product_identity() {
        let x = random_cube(3, 8, 6, 8);
        let pattern3 = SfaPattern::new(2, 2, 3, vec![0, 1, 2, 0]).unwrap();
        for spec in [
            TransformSpec::Shift { rows: 2, cols: 1 },
            TransformSpec::Flip { axis: FlipAxis::Horizontal },
            TransformSpec::Rotate { quarter_turns: 1 },
            TransformSpec::Rotate { quarter_turns: 2 },
            TransformSpec::Resize { scale: 0.63 },
            TransformSpec::Resize { scale: 1.8 },
        ] {
            let tx = apply_transform(&x, &spec, &pattern3).unwrap();
            let g = random_cube(3, tx.height(), tx.width(), 9);
            let tg = apply_transform_adjoint(&g, &spec, &pattern3, 8, 6).unwrap();
            let lhs: f64 = tx.as_slice().iter().zip(g.as_slice()).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.as_slice().iter().zip(tg.as_slice()).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10, "{spec:?}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn shift_only_policy_draws_shifts_in_range() {
        let p = SfaPattern::row_major(5, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            match random_transform(&mut rng, &p, &TransformPolicy::shift_only()) {
                TransformSpec::Shift { rows, cols } => {
                    assert!((1..=5).contains(&rows) && (1..=5).contains(&cols));
                }
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn draws_are_seed_deterministic_and_valid() {
        let p = SfaPattern::row_major(4, 4);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..200).map(|_| random_transform(&mut rng, &p, &TransformPolicy::mixed())).collect::<Vec<_>>()
        };
        let a = draw(42);
        assert_eq!(a, draw(42));
        assert!(a.iter().all(|s| s.validate(&p).is_ok()));
    }

    #[test]
    fn uniform_policy_kind_frequencies() {
        let p = SfaPattern::row_major(4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 10_000usize;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let k = random_transform(&mut rng, &p, &TransformPolicy::mixed()).kind();
            counts[TransformKind::ALL.iter().position(|&x| x == k).unwrap()] += 1;
        }
        // binomial(n, 1/4): σ = sqrt(n·p·(1−p))
        let sigma = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 / 4.0).abs() < 5.0 * sigma, "{counts:?}");
        }
    }
}
