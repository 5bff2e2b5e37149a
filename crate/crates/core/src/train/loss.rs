//! Charbonnier-based losses and their gradients.

use serde::{Deserialize, Serialize};

use crate::cube::{Cube, Plane};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::sfa::{mosaic_sample, SfaPattern};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// Weight of the mosaic-consistency term.
    pub alpha: f64,
    /// Charbonnier constant.
    pub eps: f64,
    /// Treat the transformed pseudo ground truth as a constant.
    pub stop_gradient_pseudo_gt: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { alpha: 1.0, eps: 1e-3, stop_gradient_pseudo_gt: false }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config(format!("alpha must be a finite value ≥ 0, got {}", self.alpha)));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        Ok(())
    }
}

/// Mean of `sqrt(x² + ε²)`.
pub fn charbonnier<T: Real>(residual: &[T], eps: f64) -> f64 {
    if residual.is_empty() {
        return eps;
    }
    let e2 = eps * eps;
    residual.iter().map(|x| (x.f64().powi(2) + e2).sqrt()).sum::<f64>() / residual.len() as f64
}

/// Charbonnier value and its gradient `x / (N·sqrt(x² + ε²))`.
pub fn charbonnier_with_grad<T: Real>(residual: &[T], eps: f64) -> (f64, Vec<T>) {
    let n = residual.len().max(1) as f64;
    let e2 = eps * eps;
    let mut sum = 0.0;
    let grad = residual
        .iter()
        .map(|x| {
            let x = x.f64();
            let r = (x * x + e2).sqrt();
            sum += r;
            T::of(x / (r * n))
        })
        .collect();
    (if residual.is_empty() { eps } else { sum / n }, grad)
}

fn diff<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// Charbonnier of `mosaic_sample(X̂) − Y`, averaged over the H·W pixels.
pub fn mosaic_loss<T: Real>(estimate: &Cube<T>, mosaic: &Plane<T>, pattern: &SfaPattern, eps: f64) -> Result<f64> {
    let sampled = sample_checked(estimate, mosaic, pattern)?;
    Ok(charbonnier(&diff(sampled.as_slice(), mosaic.as_slice()), eps))
}

/// Mosaic loss and its gradient with respect to the sampled plane.
pub fn mosaic_loss_with_grad<T: Real>(
    estimate: &Cube<T>,
    mosaic: &Plane<T>,
    pattern: &SfaPattern,
    eps: f64,
) -> Result<(f64, Plane<T>)> {
    let sampled = sample_checked(estimate, mosaic, pattern)?;
    let (loss, g) = charbonnier_with_grad(&diff(sampled.as_slice(), mosaic.as_slice()), eps);
    Ok((loss, Plane::from_vec(mosaic.height(), mosaic.width(), g)?))
}

fn sample_checked<T: Real>(estimate: &Cube<T>, mosaic: &Plane<T>, pattern: &SfaPattern) -> Result<Plane<T>> {
    if (estimate.height(), estimate.width()) != mosaic.dims() {
        return Err(Error::Shape(format!(
            "cube {}×{} against mosaic {}×{}",
            estimate.height(),
            estimate.width(),
            mosaic.height(),
            mosaic.width()
        )));
    }
    mosaic_sample(estimate, pattern)
}

/// Charbonnier of the elementwise difference of two cubes.
pub fn cube_loss<T: Real>(a: &Cube<T>, b: &Cube<T>, eps: f64) -> Result<f64> {
    a.check_same_dims(b)?;
    Ok(charbonnier(&diff(a.as_slice(), b.as_slice()), eps))
}

/// Cube loss and its gradient with respect to `a` (the gradient with
/// respect to `b` is the negation).
pub fn cube_loss_with_grad<T: Real>(a: &Cube<T>, b: &Cube<T>, eps: f64) -> Result<(f64, Cube<T>)> {
    a.check_same_dims(b)?;
    let (loss, g) = charbonnier_with_grad(&diff(a.as_slice(), b.as_slice()), eps);
    Ok((loss, Cube::from_vec(a.bands(), a.height(), a.width(), g)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const EPS: f64 = 1e-3;

    #[test]
    fn floor_at_zero_residual() {
        assert_eq!(charbonnier(&[0.0f64; 7], EPS), EPS);
    }

    #[test]
    fn large_residual_tends_to_l1() {
        assert!((charbonnier(&[10.0f64, -10.0], EPS) - 10.0).abs() < 1e-6);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let xs = [0.3f64, -2e-3, 5e-4, 0.0, -1.7];
        let (_, g) = charbonnier_with_grad(&xs, EPS);
        let h = 1e-7;
        for i in 0..xs.len() {
            let (mut p, mut m) = (xs, xs);
            p[i] += h;
            m[i] -= h;
            let fd = (charbonnier(&p, EPS) - charbonnier(&m, EPS)) / (2.0 * h);
            let rel = (fd - g[i]).abs() / g[i].abs().max(1e-12);
            assert!(rel < 1e-6 || (fd - g[i]).abs() < 1e-10, "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn single_pixel_error_closed_form() {
        let p = SfaPattern::row_major(2, 2);
        let (h, w) = (4, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Cube::<f64>::from_fn(4, h, w, |_, _, _| rng.random());
        let y = mosaic_sample(&x, &p).unwrap();
        let mut x2 = x.clone();
        let delta = 0.25;
        let b = p.band_at(1, 3);
        x2.set(b, 1, 3, x.get(b, 1, 3) + delta);
        let n = (h * w) as f64;
        let want = ((n - 1.0) * EPS + (delta * delta + EPS * EPS).sqrt()) / n;
        assert!((mosaic_loss(&x2, &y, &p, EPS).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn null_space_of_mask() {
        let p = SfaPattern::row_major(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Cube::<f64>::from_fn(9, 6, 9, |_, _, _| rng.random());
        let y = mosaic_sample(&x, &p).unwrap().as_slice().iter().map(|v| v + 0.01).collect::<Vec<_>>();
        let y = Plane::from_vec(6, 9, y).unwrap();
        let base = mosaic_loss(&x, &y, &p, EPS).unwrap();
        let mut x2 = x.clone();
        for b in 0..9 {
            for hh in 0..6 {
                for ww in 0..9 {
                    if p.band_at(hh, ww) != b {
                        x2.set(b, hh, ww, rng.random_range(-5.0..5.0));
                    }
                }
            }
        }
        assert_eq!(mosaic_loss(&x2, &y, &p, EPS).unwrap(), base);
    }

    #[test]
    fn cube_loss_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = Cube::<f64>::from_fn(2, 3, 3, |_, _, _| rng.random());
            let b = Cube::<f64>::from_fn(2, 3, 3, |_, _, _| rng.random());
            let mut acc = 0.0;
            for k in 0..2 {
                for i in 0..3 {
                    for j in 0..3 {
                        let d = a.get(k, i, j) - b.get(k, i, j);
                        acc += (d * d + EPS * EPS).sqrt();
                    }
                }
            }
            assert!((cube_loss(&a, &b, EPS).unwrap() - acc / 18.0).abs() < 1e-7);
        }
        let c = Cube::<f64>::zeros(2, 3, 4);
        assert!(cube_loss(&c, &Cube::zeros(2, 4, 3), EPS).is_err());
    }

    proptest! {
        #[test]
        fn cube_loss_symmetric_and_floored(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = Cube::<f64>::from_fn(3, 4, 4, |_, _, _| rng.random_range(-1.0..1.0));
            let b = Cube::<f64>::from_fn(3, 4, 4, |_, _, _| rng.random_range(-1.0..1.0));
            let ab = cube_loss(&a, &b, EPS).unwrap();
            prop_assert_eq!(ab, cube_loss(&b, &a, EPS).unwrap());
            prop_assert!(ab >= EPS);
            prop_assert!((cube_loss(&a, &a, EPS).unwrap() - EPS).abs() < 1e-15);
        }
    }
}
