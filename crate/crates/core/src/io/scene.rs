//! Procedural multispectral scenes for tests, benches and desk experiments.
//!
//! Each scene mixes a few smooth reflectance spectra over piecewise regions
//! with soft edges, then applies smooth shading and a fine texture. Spatial
//! structure is shared across bands, so neighbouring bands are strongly
//! correlated.

use rand::Rng;

use crate::cube::Cube;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneParams {
    /// 0 gives a spatially constant scene; 1 is the nominal mix.
    pub complexity: f64,
    /// Number of dictionary spectra.
    pub spectra: usize,
    /// Number of shapes at complexity 1.
    pub shapes: usize,
    /// Shape extent as a fraction of the image side.
    pub shape_size: (f64, f64),
    /// Edge softness in pixels.
    pub edge: f64,
    /// Amplitude of the multiplicative fine texture at complexity 1.
    pub texture: f64,
    /// Texture spatial frequency range, radians per pixel.
    pub texture_freq: (f64, f64),
    /// Number of gratings summed into the texture, each with a random
    /// orientation, frequency and phase.
    pub texture_components: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams { complexity: 1.0, spectra: 5, shapes: 30, shape_size: (0.05, 0.3), edge: 0.5, texture: 0.2, texture_freq: (0.6, 1.4), texture_components: 6 }
    }
}

fn smooth_spectrum<R: Rng + ?Sized>(rng: &mut R, bands: usize) -> Vec<f64> {
    let base = rng.random_range(0.25..0.65);
    let coef: Vec<f64> = (1..=3).map(|k| rng.random_range(-0.2..0.2) / k as f64).collect();
    let phase: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    (0..bands)
        .map(|b| {
            let t = if bands > 1 { b as f64 / (bands - 1) as f64 } else { 0.5 };
            let v = base
                + coef
                    .iter()
                    .zip(&phase)
                    .enumerate()
                    .map(|(k, (c, p))| c * (std::f64::consts::PI * (k + 1) as f64 * t + p).cos())
                    .sum::<f64>();
            v.clamp(0.05, 0.95)
        })
        .collect()
}

enum Shape {
    Ellipse { cy: f64, cx: f64, ry: f64, rx: f64, cos: f64, sin: f64 },
    HalfPlane { ny: f64, nx: f64, off: f64 },
    Rect { y0: f64, x0: f64, y1: f64, x1: f64 },
}

impl Shape {
    /// Signed distance-like value, positive inside.
    fn inside(&self, y: f64, x: f64) -> f64 {
        match *self {
            Shape::Ellipse { cy, cx, ry, rx, cos, sin } => {
                let (dy, dx) = (y - cy, x - cx);
                let (u, v) = (cos * dy + sin * dx, -sin * dy + cos * dx);
                let r = ((u / ry).powi(2) + (v / rx).powi(2)).sqrt();
                (1.0 - r) * ry.min(rx)
            }
            Shape::HalfPlane { ny, nx, off } => ny * y + nx * x - off,
            Shape::Rect { y0, x0, y1, x1 } => (y - y0).min(y1 - y).min(x - x0).min(x1 - x),
        }
    }
}

fn random_shape<R: Rng + ?Sized>(rng: &mut R, h: f64, w: f64, size: (f64, f64)) -> Shape {
    let (ey, ex) = (rng.random_range(size.0..size.1) * h, rng.random_range(size.0..size.1) * w);
    match rng.random_range(0..3) {
        0 => {
            let a: f64 = rng.random_range(0.0..std::f64::consts::PI);
            Shape::Ellipse {
                cy: rng.random_range(0.0..h),
                cx: rng.random_range(0.0..w),
                ry: ey,
                rx: ex,
                cos: a.cos(),
                sin: a.sin(),
            }
        }
        1 => {
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let (ny, nx) = (a.sin(), a.cos());
            let off = ny * rng.random_range(0.0..h) + nx * rng.random_range(0.0..w);
            Shape::HalfPlane { ny, nx, off }
        }
        _ => {
            let (y0, x0) = (rng.random_range(0.0..h * 0.9), rng.random_range(0.0..w * 0.9));
            Shape::Rect { y0, x0, y1: y0 + 1.5 * ey, x1: x0 + 1.5 * ex }
        }
    }
}

/// Generates a `bands × height × width` cube with values in [0, 1].
pub fn generate_scene<R: Rng + ?Sized>(
    rng: &mut R,
    height: usize,
    width: usize,
    bands: usize,
    params: &SceneParams,
) -> Cube<f64> {
    let c = params.complexity.max(0.0);
    let dict: Vec<Vec<f64>> = (0..params.spectra.max(1)).map(|_| smooth_spectrum(rng, bands)).collect();
    if c == 0.0 {
        return Cube::from_fn(bands, height, width, |b, _, _| dict[0][b]);
    }
    let (hf, wf) = (height as f64, width as f64);

    let mix = |rng: &mut R| -> Vec<f64> {
        let i = rng.random_range(0..dict.len());
        let j = rng.random_range(0..dict.len());
        let t: f64 = rng.random_range(0.0..1.0);
        (0..bands).map(|b| (1.0 - t) * dict[i][b] + t * dict[j][b]).collect()
    };

    // Background: smooth blend between two spectra.
    let bg_a = mix(rng);
    let bg_b = mix(rng);
    let (gy, gx) = (rng.random_range(-1.0..1.0) / hf, rng.random_range(-1.0..1.0) / wf);

    let n_shapes = (params.shapes as f64 * c).ceil() as usize;
    let shapes: Vec<(Shape, Vec<f64>)> = (0..n_shapes).map(|_| (random_shape(rng, hf, wf, params.shape_size), mix(rng))).collect();

    let shade_amp = 0.25 * c.min(1.0);
    let (sfy, sfx, sp) = (
        rng.random_range(0.5..2.0) * std::f64::consts::TAU / hf,
        rng.random_range(0.5..2.0) * std::f64::consts::TAU / wf,
        rng.random_range(0.0..std::f64::consts::TAU),
    );
    let tex_amp = params.texture * c.min(1.0);
    let gratings: Vec<(f64, f64, f64)> = (0..params.texture_components)
        .map(|_| {
            let f = rng.random_range(params.texture_freq.0..params.texture_freq.1);
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            (f * a.cos(), f * a.sin(), rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let tex_norm = 1.0 / (params.texture_components.max(1) as f64).sqrt();

    let mut cube = Cube::zeros(bands, height, width);
    let plane = height * width;
    let mut spec = vec![0.0; bands];
    for y in 0..height {
        for x in 0..width {
            let (yf, xf) = (y as f64 + 0.5, x as f64 + 0.5);
            let t = (0.5 + gy * yf * 0.5 + gx * xf * 0.5).clamp(0.0, 1.0);
            for b in 0..bands {
                spec[b] = (1.0 - t) * bg_a[b] + t * bg_b[b];
            }
            for (shape, s) in &shapes {
                let d = shape.inside(yf, xf);
                let alpha = 1.0 / (1.0 + (-d / params.edge).exp());
                if alpha > 1e-6 {
                    for b in 0..bands {
                        spec[b] = (1.0 - alpha) * spec[b] + alpha * s[b];
                    }
                }
            }
            let shade = 1.0 - shade_amp * 0.5 * (1.0 + (sfy * yf + sp).sin() * (sfx * xf).cos());
            let tex = 1.0 + tex_amp * tex_norm * gratings.iter().map(|(ky, kx, p)| (ky * yf + kx * xf + p).sin()).sum::<f64>();
            let data = cube.as_mut_slice();
            for b in 0..bands {
                data[b * plane + y * width + x] = (spec[b] * shade * tex).clamp(0.0, 1.0);
            }
        }
    }
    cube
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn zero_complexity_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = SceneParams { complexity: 0.0, ..Default::default() };
        let c = generate_scene(&mut rng, 8, 8, 6, &p);
        for b in 0..6 {
            assert!(c.band(b).iter().all(|&v| v == c.band(b)[0]));
        }
    }

    #[test]
    fn values_in_unit_range_and_adjacent_bands_correlated() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut corr = Vec::new();
        for _ in 0..100 {
            let c = generate_scene(&mut rng, 32, 32, 16, &SceneParams::default());
            assert!(c.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
            for b in 0..15 {
                corr.push(correlation(c.band(b), c.band(b + 1)));
            }
        }
        let mean = corr.iter().sum::<f64>() / corr.len() as f64;
        assert!(mean > 0.9, "mean adjacent-band correlation {mean}");
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_scene(&mut ChaCha8Rng::seed_from_u64(1), 16, 16, 4, &SceneParams::default());
        let b = generate_scene(&mut ChaCha8Rng::seed_from_u64(1), 16, 16, 4, &SceneParams::default());
        assert_eq!(a, b);
    }
}
