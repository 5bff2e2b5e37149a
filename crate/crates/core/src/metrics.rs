//! Full-reference quality metrics for cubes with known ground truth.
//!
//! Defaults: peak 1.0 for PSNR, 11-tap Gaussian SSIM window with σ = 1.5,
//! K1 = 0.01, K2 = 0.03 and dynamic range 1.0, SAM in degrees, ERGAS
//! resolution ratio 1.

use serde::Serialize;

use crate::cube::Cube;
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams { window: 11, sigma: 1.5, k1: 0.01, k2: 0.03, dynamic_range: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricOptions {
    pub peak: f64,
    pub ssim: SsimParams,
    pub ergas_ratio: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        MetricOptions { peak: 1.0, ssim: SsimParams::default(), ergas_ratio: 1.0 }
    }
}

impl MetricOptions {
    /// ERGAS ratio `1/√(r1·r2)`, the demosaicing analogue of the
    /// pan-sharpening resolution ratio.
    pub fn with_mosaic_ratio(mut self, r1: usize, r2: usize) -> Self {
        self.ergas_ratio = 1.0 / ((r1 * r2) as f64).sqrt();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    /// dB over the whole cube; `+∞` for identical cubes.
    pub psnr: f64,
    /// Mean of per-band PSNR values.
    pub psnr_band_mean: f64,
    pub ssim: f64,
    /// Degrees; absent when every pixel has a zero spectrum.
    pub sam: Option<f64>,
    /// Absent when every reference band has zero mean.
    pub ergas: Option<f64>,
    pub per_band_psnr: Vec<f64>,
    pub per_band_ssim: Vec<f64>,
}

fn check<T: Real>(a: &Cube<T>, b: &Cube<T>) -> Result<()> {
    a.check_same_dims(b)?;
    if a.as_slice().is_empty() {
        return Err(Error::Shape("empty cube".into()));
    }
    Ok(())
}

fn mse_slice<T: Real>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.f64() - y.f64()).powi(2)).sum::<f64>() / a.len() as f64
}

fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak * peak / mse).log10()
    }
}

/// `10·log10(peak² / MSE)` with the MSE over every element.
pub fn psnr<T: Real>(estimate: &Cube<T>, reference: &Cube<T>, peak: f64) -> Result<f64> {
    check(estimate, reference)?;
    Ok(psnr_from_mse(mse_slice(estimate.as_slice(), reference.as_slice()), peak))
}

pub fn psnr_per_band<T: Real>(estimate: &Cube<T>, reference: &Cube<T>, peak: f64) -> Result<Vec<f64>> {
    check(estimate, reference)?;
    Ok((0..reference.bands()).map(|b| psnr_from_mse(mse_slice(estimate.band(b), reference.band(b)), peak)).collect())
}

fn gaussian_taps(params: &SsimParams) -> Vec<f64> {
    let c = (params.window as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..params.window).map(|i| (-(i as f64 - c).powi(2) / (2.0 * params.sigma.powi(2))).exp()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering of a row-major plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let n = taps.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().enumerate().map(|(k, t)| t * plane[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(k, t)| t * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

fn ssim_band(a: &[f64], b: &[f64], h: usize, w: usize, params: &SsimParams) -> f64 {
    let taps = gaussian_taps(params);
    let c1 = (params.k1 * params.dynamic_range).powi(2);
    let c2 = (params.k2 * params.dynamic_range).powi(2);
    let prod = |f: &dyn Fn(f64, f64) -> f64| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect::<Vec<f64>>();
    let mu_a = filter_valid(a, h, w, &taps);
    let mu_b = filter_valid(b, h, w, &taps);
    let aa = filter_valid(&prod(&|x, _| x * x), h, w, &taps);
    let bb = filter_valid(&prod(&|_, y| y * y), h, w, &taps);
    let ab = filter_valid(&prod(&|x, y| x * y), h, w, &taps);
    let n = mu_a.len();
    (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum::<f64>()
        / n as f64
}

pub fn ssim_per_band<T: Real>(estimate: &Cube<T>, reference: &Cube<T>, params: &SsimParams) -> Result<Vec<f64>> {
    check(estimate, reference)?;
    let (_, h, w) = reference.dims();
    if h < params.window || w < params.window {
        return Err(Error::Shape(format!("{h}×{w} image is smaller than the {0}×{0} SSIM window", params.window)));
    }
    Ok((0..reference.bands())
        .map(|b| {
            let a: Vec<f64> = estimate.band(b).iter().map(|v| v.f64()).collect();
            let r: Vec<f64> = reference.band(b).iter().map(|v| v.f64()).collect();
            ssim_band(&a, &r, h, w, params)
        })
        .collect())
}

/// Single-scale SSIM per band, averaged over bands.
pub fn ssim<T: Real>(estimate: &Cube<T>, reference: &Cube<T>, params: &SsimParams) -> Result<f64> {
    let per = ssim_per_band(estimate, reference, params)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

/// Mean spectral angle in degrees over pixels where both spectra are nonzero.
///
/// The angle is evaluated as `2·atan2(‖u − v‖, ‖u + v‖)` on the unit spectra,
/// which equals `arccos⟨u, v⟩` but stays accurate near 0 and 180 degrees.
pub fn sam<T: Real>(estimate: &Cube<T>, reference: &Cube<T>) -> Result<Option<f64>> {
    check(estimate, reference)?;
    let (bands, h, w) = reference.dims();
    let n = h * w;
    let (mut total, mut count) = (0.0, 0usize);
    let (mut x, mut y) = (vec![0.0; bands], vec![0.0; bands]);
    for p in 0..n {
        for b in 0..bands {
            x[b] = estimate.as_slice()[b * n + p].f64();
            y[b] = reference.as_slice()[b * n + p].f64();
        }
        let na = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            continue;
        }
        let (mut diff, mut sum) = (0.0, 0.0);
        for (a, b) in x.iter().zip(&y) {
            let (u, v) = (a / na, b / nb);
            diff += (u - v) * (u - v);
            sum += (u + v) * (u + v);
        }
        total += 2.0 * diff.sqrt().atan2(sum.sqrt());
        count += 1;
    }
    Ok((count > 0).then(|| (total / count as f64).to_degrees()))
}

/// `100·ratio·sqrt(mean_b (RMSE_b / μ_b)²)`; bands whose reference mean is
/// zero are skipped with a warning.
pub fn ergas<T: Real>(estimate: &Cube<T>, reference: &Cube<T>, ratio: f64) -> Result<Option<f64>> {
    check(estimate, reference)?;
    let mut acc = 0.0;
    let mut used = 0usize;
    for b in 0..reference.bands() {
        let r = reference.band(b);
        let mean = r.iter().map(|v| v.f64()).sum::<f64>() / r.len() as f64;
        if mean == 0.0 {
            log::warn!("ERGAS: band {b} has zero mean in the reference and is excluded");
            continue;
        }
        acc += mse_slice(estimate.band(b), r) / (mean * mean);
        used += 1;
    }
    Ok((used > 0).then(|| 100.0 * ratio * (acc / used as f64).sqrt()))
}

pub fn evaluate<T: Real>(estimate: &Cube<T>, reference: &Cube<T>, opts: &MetricOptions) -> Result<MetricReport> {
    let per_band_psnr = psnr_per_band(estimate, reference, opts.peak)?;
    let per_band_ssim = ssim_per_band(estimate, reference, &opts.ssim)?;
    Ok(MetricReport {
        psnr: psnr(estimate, reference, opts.peak)?,
        psnr_band_mean: per_band_psnr.iter().sum::<f64>() / per_band_psnr.len() as f64,
        ssim: per_band_ssim.iter().sum::<f64>() / per_band_ssim.len() as f64,
        sam: sam(estimate, reference)?,
        ergas: ergas(estimate, reference, opts.ergas_ratio)?,
        per_band_psnr,
        per_band_ssim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities() {
        let x = Cube::<f64>::from_fn(3, 12, 12, |b, h, w| 0.1 + 0.02 * (b + h + w) as f64);
        let r = evaluate(&x, &x, &MetricOptions::default()).unwrap();
        assert_eq!(r.psnr, f64::INFINITY);
        assert!((r.ssim - 1.0).abs() < 1e-12);
        assert_eq!(r.sam, Some(0.0));
        assert_eq!(r.ergas, Some(0.0));
    }

    #[test]
    fn constant_error_psnr() {
        let x = Cube::<f64>::filled(2, 4, 4, 0.5);
        let y = Cube::<f64>::filled(2, 4, 4, 0.6);
        assert!((psnr(&x, &y, 1.0).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn sam_scale_invariance_and_orthogonality() {
        let x = Cube::<f64>::from_fn(4, 3, 3, |b, h, w| 0.1 + (b * 3 + h + w) as f64 * 0.01);
        let y = x.map(|v| v * 2.5);
        assert!(sam(&y, &x).unwrap().unwrap().abs() < 1e-12);
        let a = Cube::<f64>::from_fn(2, 3, 3, |b, _, _| if b == 0 { 1.0 } else { 0.0 });
        let b = Cube::<f64>::from_fn(2, 3, 3, |b, _, _| if b == 1 { 1.0 } else { 0.0 });
        assert!((sam(&a, &b).unwrap().unwrap() - 90.0).abs() < 1e-12);
        let z = Cube::<f64>::zeros(2, 3, 3);
        assert_eq!(sam(&z, &b).unwrap(), None);
    }

    #[test]
    fn ergas_scale_invariant_and_skips_zero_bands() {
        let x = Cube::<f64>::from_fn(3, 4, 4, |b, h, w| 0.2 + 0.05 * ((b + 2 * h + w) % 5) as f64);
        let y = Cube::<f64>::from_fn(3, 4, 4, |b, h, w| 0.21 + 0.05 * ((b + h + 2 * w) % 5) as f64);
        let e = ergas(&y, &x, 1.0).unwrap().unwrap();
        let e2 = ergas(&y.map(|v| v * 7.0), &x.map(|v| v * 7.0), 1.0).unwrap().unwrap();
        assert!((e - e2).abs() < 1e-9 * e);
        let mut z = x.clone();
        z.band_mut(1).fill(0.0);
        assert!(ergas(&y, &z, 1.0).unwrap().is_some());
        assert_eq!(ergas(&y, &Cube::zeros(3, 4, 4), 1.0).unwrap(), None);
    }

    #[test]
    fn ssim_rejects_small_images_and_is_symmetric() {
        let a = Cube::<f64>::filled(1, 10, 20, 0.3);
        assert!(ssim(&a, &a, &SsimParams::default()).is_err());
        let a = Cube::<f64>::from_fn(2, 16, 16, |b, h, w| ((b + h * w) % 7) as f64 / 7.0);
        let c = Cube::<f64>::from_fn(2, 16, 16, |b, h, w| ((b * 3 + h + w) % 5) as f64 / 5.0);
        let p = SsimParams::default();
        assert!((ssim(&a, &c, &p).unwrap() - ssim(&c, &a, &p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let a = Cube::<f64>::zeros(2, 4, 4);
        let b = Cube::<f64>::zeros(3, 4, 4);
        assert!(psnr(&a, &b, 1.0).is_err());
        assert!(sam(&a, &b).is_err());
    }

    #[test]
    fn psnr_falls_as_noise_grows() {
        let x = Cube::<f64>::from_fn(2, 16, 16, |b, h, w| 0.5 + 0.1 * ((b + h + w) as f64).sin());
        let noisy = |amp: f64| Cube::<f64>::from_fn(2, 16, 16, |b, h, w| x.get(b, h, w) + amp * ((7 * b + 13 * h + 29 * w) as f64).sin());
        let vals: Vec<f64> = [0.01, 0.02, 0.05].iter().map(|&a| psnr(&noisy(a), &x, 1.0).unwrap()).collect();
        assert!(vals[0] > vals[1] && vals[1] > vals[2]);
    }
}
