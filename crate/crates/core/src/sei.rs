//! Self-evaluation index: how strongly each band carries structure locked
//! to the SFA period, and the early-stopping rule built on it.
//!
//! For band `b`, `v_b` is the population variance of the r1·r2 phase
//! sub-image means; the cube index is the mean of `v_b` over bands. The
//! statistic scales with the square of the intensity, so thresholds assume
//! data normalized to [0, 1].

use serde::{Deserialize, Serialize};

use crate::cube::{Cube, Plane};
use crate::real::Real;
use crate::sfa::{phase_means, SfaPattern};

/// Threshold used for synthetic (simulated-mosaic) experiments.
pub const SEI_MAX_SYNTHETIC: f64 = 2.1e-7;
/// Threshold used for real 25-band camera mosaics.
pub const SEI_MAX_REAL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeiPoint {
    pub epoch: usize,
    pub sei: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeiReport {
    pub per_band: Vec<f64>,
    pub sei: f64,
    pub epoch: Option<usize>,
}

fn band_sei_slice<T: Real>(band: &[T], height: usize, width: usize, pattern: &SfaPattern) -> f64 {
    let (r1, r2) = pattern.period();
    let (h, w) = pattern.snap_down(height, width);
    if h == 0 || w == 0 {
        return 0.0;
    }
    let means: Vec<f64> = if (h, w) == (height, width) {
        phase_means(band, h, w, r1, r2).into_iter().map(Real::f64).collect()
    } else {
        let cropped: Vec<T> = (0..h).flat_map(|y| band[y * width..y * width + w].iter().copied()).collect();
        phase_means(&cropped, h, w, r1, r2).into_iter().map(Real::f64).collect()
    };
    let n = means.len() as f64;
    let mu = means.iter().sum::<f64>() / n;
    means.iter().map(|m| (m - mu).powi(2)).sum::<f64>() / n
}

/// `v_b` for one band image; trailing partial periods are cropped.
pub fn band_sei<T: Real>(band: &Plane<T>, pattern: &SfaPattern) -> f64 {
    band_sei_slice(band.as_slice(), band.height(), band.width(), pattern)
}

pub fn cube_sei<T: Real>(cube: &Cube<T>, pattern: &SfaPattern) -> SeiReport {
    let per_band: Vec<f64> =
        (0..cube.bands()).map(|b| band_sei_slice(cube.band(b), cube.height(), cube.width(), pattern)).collect();
    let sei = if per_band.is_empty() { 0.0 } else { per_band.iter().sum::<f64>() / per_band.len() as f64 };
    SeiReport { per_band, sei, epoch: None }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopDecision {
    pub stop: bool,
    /// Index into the history of the lowest SEI seen so far.
    pub best: Option<usize>,
}

/// Stop once the latest SEI exceeds `sei_max`; also reports the argmin.
pub fn should_stop(history: &[SeiPoint], sei_max: f64) -> StopDecision {
    let stop = history.last().is_some_and(|p| p.sei > sei_max);
    let best = history
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.sei.total_cmp(&b.1.sei))
        .map(|(i, _)| i);
    StopDecision { stop, best }
}
