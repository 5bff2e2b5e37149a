//! Dense containers: `Cube` (bands × height × width, band-major) and
//! `Plane` (height × width). Both are row-major within a plane.

use crate::error::{Error, Result};
use crate::real::Real;

/// A B×H×W array stored band-major. Holds spectral cubes and feature maps.
#[derive(Clone, Debug, PartialEq)]
pub struct Cube<T = f64> {
    bands: usize,
    height: usize,
    width: usize,
    data: Vec<T>,
}

/// Radiance cube X (and the network estimates derived from it).
pub type SpectralCube<T = f64> = Cube<T>;
/// C×H×W activations inside the network.
pub type FeatureMap<T> = Cube<T>;

/// A single H×W plane.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane<T = f64> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

/// Observed single-plane mosaic Y.
pub type MosaicImage<T = f64> = Plane<T>;

impl<T: Real> Cube<T> {
    pub fn zeros(bands: usize, height: usize, width: usize) -> Self {
        Self::filled(bands, height, width, T::zero())
    }

    pub fn filled(bands: usize, height: usize, width: usize, value: T) -> Self {
        Cube { bands, height, width, data: vec![value; bands * height * width] }
    }

    pub fn from_vec(bands: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != bands * height * width {
            return Err(Error::Shape(format!(
                "{} values for a {bands}×{height}×{width} cube",
                data.len()
            )));
        }
        Ok(Cube { bands, height, width, data })
    }

    pub fn from_fn(bands: usize, height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(bands * height * width);
        for b in 0..bands {
            for h in 0..height {
                for w in 0..width {
                    data.push(f(b, h, w));
                }
            }
        }
        Cube { bands, height, width, data }
    }

    /// Stacks equally sized planes as bands.
    pub fn from_planes(planes: &[Plane<T>]) -> Result<Self> {
        let first = planes.first().ok_or_else(|| Error::Shape("no planes to stack".into()))?;
        let (height, width) = first.dims();
        let mut data = Vec::with_capacity(planes.len() * height * width);
        for p in planes {
            if p.dims() != (height, width) {
                return Err(Error::Shape("planes differ in size".into()));
            }
            data.extend_from_slice(p.as_slice());
        }
        Ok(Cube { bands: planes.len(), height, width, data })
    }

    #[inline]
    pub fn bands(&self) -> usize {
        self.bands
    }
    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }
    /// `(bands, height, width)`
    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.bands, self.height, self.width)
    }
    #[inline]
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn get(&self, b: usize, h: usize, w: usize) -> T {
        self.data[(b * self.height + h) * self.width + w]
    }

    #[inline]
    pub fn set(&mut self, b: usize, h: usize, w: usize, v: T) {
        self.data[(b * self.height + h) * self.width + w] = v;
    }

    pub fn band(&self, b: usize) -> &[T] {
        let n = self.plane_len();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn band_mut(&mut self, b: usize) -> &mut [T] {
        let n = self.plane_len();
        &mut self.data[b * n..(b + 1) * n]
    }

    pub fn band_plane(&self, b: usize) -> Plane<T> {
        Plane { height: self.height, width: self.width, data: self.band(b).to_vec() }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> Cube<U> {
        Cube { bands: self.bands, height: self.height, width: self.width, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn cast<U: Real>(&self) -> Cube<U> {
        self.map(|v| U::of(v.f64()))
    }

    /// Spatial crop `[top, top+height) × [left, left+width)` of every band.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width {
            return Err(Error::Shape(format!(
                "crop {height}×{width}+{top}+{left} exceeds {}×{}",
                self.height, self.width
            )));
        }
        Ok(Cube::from_fn(self.bands, height, width, |b, h, w| self.get(b, top + h, left + w)))
    }

    /// Concatenates two cubes of equal spatial size along the band axis.
    pub fn concat_bands(&self, other: &Cube<T>) -> Result<Self> {
        if (self.height, self.width) != (other.height, other.width) {
            return Err(Error::Shape("cannot concatenate cubes of different spatial size".into()));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Cube { bands: self.bands + other.bands, height: self.height, width: self.width, data })
    }

    /// Elementwise `self += alpha * other`.
    pub fn axpy(&mut self, alpha: T, other: &Cube<T>) -> Result<()> {
        self.check_same_dims(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn check_same_dims(&self, other: &Cube<T>) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.dims(), other.dims())));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

impl<T: Real> Plane<T> {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, T::zero())
    }

    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Plane { height, width, data: vec![value; height * width] }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Shape(format!("{} values for a {height}×{width} plane", data.len())));
        }
        Ok(Plane { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for h in 0..height {
            for w in 0..width {
                data.push(f(h, w));
            }
        }
        Plane { height, width, data }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }
    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }
    #[inline]
    pub fn get(&self, h: usize, w: usize) -> T {
        self.data[h * self.width + w]
    }
    #[inline]
    pub fn set(&mut self, h: usize, w: usize, v: T) {
        self.data[h * self.width + w] = v;
    }
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }
    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn cast<U: Real>(&self) -> Plane<U> {
        Plane { height: self.height, width: self.width, data: self.data.iter().map(|v| U::of(v.f64())).collect() }
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width {
            return Err(Error::Shape(format!(
                "crop {height}×{width}+{top}+{left} exceeds {}×{}",
                self.height, self.width
            )));
        }
        Ok(Plane::from_fn(height, width, |h, w| self.get(top + h, left + w)))
    }

    /// Views the plane as a one-band cube.
    pub fn into_cube(self) -> Cube<T> {
        Cube { bands: 1, height: self.height, width: self.width, data: self.data }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_major_indexing() {
        let c = Cube::<f64>::from_fn(2, 3, 4, |b, h, w| (100 * b + 10 * h + w) as f64);
        assert_eq!(c.get(1, 2, 3), 123.0);
        assert_eq!(c.band(1)[0], 100.0);
        assert_eq!(c.as_slice()[12 + 4 + 1], 111.0);
    }

    #[test]
    fn crop_and_concat() {
        let c = Cube::<f64>::from_fn(1, 4, 4, |_, h, w| (h * 4 + w) as f64);
        let k = c.crop(1, 2, 2, 2).unwrap();
        assert_eq!(k.as_slice(), &[6.0, 7.0, 10.0, 11.0]);
        assert!(c.crop(3, 3, 2, 2).is_err());
        let cc = c.concat_bands(&c).unwrap();
        assert_eq!(cc.dims(), (2, 4, 4));
        assert_eq!(cc.band(1), c.band(0));
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(Cube::<f32>::from_vec(2, 2, 2, vec![0.0; 7]).is_err());
        assert!(Plane::<f32>::from_vec(2, 3, vec![0.0; 6]).is_ok());
    }
}
