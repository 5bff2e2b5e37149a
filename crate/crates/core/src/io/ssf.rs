//! Gaussian spectral sensitivity functions and cube resampling.

use crate::cube::Cube;
use crate::error::{Error, Result};
use crate::real::Real;

pub const DEFAULT_RANGE_NM: (f64, f64) = (600.0, 900.0);

/// Row-stochastic map from source wavelengths to filter bands.
#[derive(Clone, Debug, PartialEq)]
pub struct SsfBank {
    pub source_wavelengths: Vec<f64>,
    pub centers: Vec<f64>,
    pub fwhm: f64,
    /// `bands × source_wavelengths.len()`, each row summing to one.
    pub weights: Vec<Vec<f64>>,
}

/// Evenly spaced Gaussian filters over `range`, centred at the midpoint of
/// each of `bands` equal sub-intervals. `fwhm` defaults to the spacing.
pub fn make_ssf_bank(source: &[f64], bands: usize, range: (f64, f64), fwhm: Option<f64>) -> Result<SsfBank> {
    let (lo, hi) = range;
    if bands == 0 || !(hi > lo) {
        return Err(Error::Config(format!("invalid SSF range {lo}..{hi} for {bands} bands")));
    }
    if source.is_empty() {
        return Err(Error::Config("no source wavelengths".into()));
    }
    let (smin, smax) = source.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if smin > lo || smax < hi {
        return Err(Error::Config(format!(
            "source wavelengths {smin}..{smax} nm do not cover the filter range {lo}..{hi} nm"
        )));
    }
    let step = (hi - lo) / bands as f64;
    let fwhm = fwhm.unwrap_or(step);
    if !(fwhm > 0.0) {
        return Err(Error::Config(format!("fwhm must be positive, got {fwhm}")));
    }
    let sigma = fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
    let centers: Vec<f64> = (0..bands).map(|k| lo + (k as f64 + 0.5) * step).collect();
    let weights = centers
        .iter()
        .map(|&c| {
            // Normalize in the log domain so far-off narrow filters do not
            // underflow to an all-zero row.
            let logs: Vec<f64> = source.iter().map(|&l| -0.5 * ((l - c) / sigma).powi(2)).collect();
            let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let row: Vec<f64> = logs.iter().map(|v| (v - peak).exp()).collect();
            let sum: f64 = row.iter().sum();
            row.into_iter().map(|v| v / sum).collect()
        })
        .collect();
    Ok(SsfBank { source_wavelengths: source.to_vec(), centers, fwhm, weights })
}

/// Projects a source cube onto the bank's bands.
pub fn spectral_resample<T: Real>(cube: &Cube<T>, bank: &SsfBank) -> Result<Cube<T>> {
    if cube.bands() != bank.source_wavelengths.len() {
        return Err(Error::BandMismatch { expected: bank.source_wavelengths.len(), found: cube.bands() });
    }
    let (_, h, w) = cube.dims();
    let mut out = Cube::zeros(bank.weights.len(), h, w);
    for (k, row) in bank.weights.iter().enumerate() {
        let dst = out.band_mut(k);
        for (j, &wt) in row.iter().enumerate() {
            if wt < 1e-12 {
                continue;
            }
            let wt = T::of(wt);
            for (d, &s) in dst.iter_mut().zip(cube.band(j)) {
                *d += wt * s;
            }
        }
    }
    Ok(out)
}
