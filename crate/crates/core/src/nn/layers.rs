//! Trainable building blocks with explicit forward caches and backward passes.

use rand::Rng;

use crate::cube::Cube;
use crate::linalg::{gemm_nn, gemm_nt, gemm_tn};
use crate::real::Real;

/// A named view of one parameter tensor.
#[derive(Debug)]
pub struct ParamTensor<'a, T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [T],
}

pub(crate) type ParamMut<'a, T> = (String, &'a mut [T]);

/// Enumerates trainable tensors in a stable order.
pub(crate) trait Params<T> {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<ParamTensor<'a, T>>);
    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamMut<'a, T>>);
}

fn uniform<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize, bound: f64) -> Vec<T> {
    (0..n).map(|_| T::of(rng.random_range(-bound..=bound))).collect()
}

/// 3×3 convolution, stride 1, zero padding 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d<T> {
    pub(crate) cin: usize,
    pub(crate) cout: usize,
    /// `cout × (cin·9)`, taps ordered `(ci, ky, kx)`.
    pub(crate) weight: Vec<T>,
    pub(crate) bias: Vec<T>,
}

pub(crate) struct ConvCache<T> {
    col: Vec<T>,
    height: usize,
    width: usize,
}

impl<T: Real> Conv2d<T> {
    pub fn zeros(cin: usize, cout: usize) -> Self {
        Conv2d { cin, cout, weight: vec![T::zero(); cout * cin * 9], bias: vec![T::zero(); cout] }
    }

    /// Uniform in ±1/√fan_in for weights and biases.
    pub fn init<R: Rng + ?Sized>(cin: usize, cout: usize, rng: &mut R) -> Self {
        let bound = 1.0 / ((cin * 9) as f64).sqrt();
        Conv2d { cin, cout, weight: uniform(rng, cout * cin * 9, bound), bias: uniform(rng, cout, bound) }
    }

    pub fn weight(&self) -> &[T] {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut [T] {
        &mut self.weight
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    fn im2col(&self, x: &Cube<T>) -> Vec<T> {
        let (h, w) = (x.height(), x.width());
        let hw = h * w;
        let mut col = vec![T::zero(); self.cin * 9 * hw];
        for ci in 0..self.cin {
            let src = x.band(ci);
            for ky in 0..3 {
                for kx in 0..3 {
                    let dst = &mut col[((ci * 9) + ky * 3 + kx) * hw..][..hw];
                    for oy in 0..h {
                        let sy = oy as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let srow = &src[sy as usize * w..][..w];
                        let drow = &mut dst[oy * w..][..w];
                        match kx {
                            0 => drow[1..].copy_from_slice(&srow[..w - 1]),
                            1 => drow.copy_from_slice(srow),
                            _ => drow[..w - 1].copy_from_slice(&srow[1..]),
                        }
                    }
                }
            }
        }
        col
    }

    fn col2im(&self, col: &[T], h: usize, w: usize) -> Cube<T> {
        let hw = h * w;
        let mut x = Cube::zeros(self.cin, h, w);
        for ci in 0..self.cin {
            let dst = x.band_mut(ci);
            for ky in 0..3 {
                for kx in 0..3 {
                    let src = &col[((ci * 9) + ky * 3 + kx) * hw..][..hw];
                    for oy in 0..h {
                        let sy = oy as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        let srow = &src[oy * w..][..w];
                        let drow = &mut dst[sy as usize * w..][..w];
                        match kx {
                            0 => drow[..w - 1].iter_mut().zip(&srow[1..]).for_each(|(d, &s)| *d += s),
                            1 => drow.iter_mut().zip(srow).for_each(|(d, &s)| *d += s),
                            _ => drow[1..].iter_mut().zip(&srow[..w - 1]).for_each(|(d, &s)| *d += s),
                        }
                    }
                }
            }
        }
        x
    }

    pub(crate) fn forward(&self, x: &Cube<T>) -> (Cube<T>, ConvCache<T>) {
        assert_eq!(x.bands(), self.cin, "conv input channels");
        let (h, w) = (x.height(), x.width());
        let hw = h * w;
        let col = self.im2col(x);
        let mut out = Cube::zeros(self.cout, h, w);
        for (o, &b) in self.bias.iter().enumerate() {
            out.band_mut(o).fill(b);
        }
        gemm_nn(self.cout, self.cin * 9, hw, &self.weight, &col, T::one(), out.as_mut_slice());
        (out, ConvCache { col, height: h, width: w })
    }

    /// Accumulates parameter gradients into `grad`; returns the input
    /// gradient when `need_input` is set.
    pub(crate) fn backward(&self, cache: ConvCache<T>, dout: &Cube<T>, grad: &mut Conv2d<T>, need_input: bool) -> Option<Cube<T>> {
        let hw = cache.height * cache.width;
        let k = self.cin * 9;
        gemm_nt(self.cout, hw, k, dout.as_slice(), &cache.col, T::one(), &mut grad.weight);
        for (o, gb) in grad.bias.iter_mut().enumerate() {
            *gb += dout.band(o).iter().copied().sum::<T>();
        }
        if !need_input {
            return None;
        }
        let mut dcol = cache.col;
        gemm_tn(k, self.cout, hw, &self.weight, dout.as_slice(), T::zero(), &mut dcol);
        Some(self.col2im(&dcol, cache.height, cache.width))
    }

    /// Multiply-accumulates for one forward pass over an `h × w` map.
    pub fn macs(&self, h: usize, w: usize) -> u64 {
        (self.cout * self.cin * 9 * h * w) as u64
    }
}

impl<T: Real> Params<T> for Conv2d<T> {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<ParamTensor<'a, T>>) {
        out.push(ParamTensor { name: format!("{prefix}.weight"), shape: vec![self.cout, self.cin, 3, 3], data: &self.weight });
        out.push(ParamTensor { name: format!("{prefix}.bias"), shape: vec![self.cout], data: &self.bias });
    }
    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamMut<'a, T>>) {
        out.push((format!("{prefix}.weight"), &mut self.weight));
        out.push((format!("{prefix}.bias"), &mut self.bias));
    }
}

/// Fully connected layer `y = W x + b`, `W` stored `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub(crate) inp: usize,
    pub(crate) out: usize,
    pub(crate) weight: Vec<T>,
    pub(crate) bias: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(inp: usize, out: usize) -> Self {
        Dense { inp, out, weight: vec![T::zero(); inp * out], bias: vec![T::zero(); out] }
    }

    pub fn init<R: Rng + ?Sized>(inp: usize, out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inp as f64).sqrt();
        Dense { inp, out, weight: uniform(rng, inp * out, bound), bias: uniform(rng, out, bound) }
    }

    pub fn weight_mut(&mut self) -> &mut [T] {
        &mut self.weight
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        let mut y = self.bias.clone();
        gemm_nn(self.out, self.inp, 1, &self.weight, x, T::one(), &mut y);
        y
    }

    pub(crate) fn backward(&self, x: &[T], dy: &[T], grad: &mut Dense<T>) -> Vec<T> {
        gemm_nn(self.out, 1, self.inp, dy, x, T::one(), &mut grad.weight);
        grad.bias.iter_mut().zip(dy).for_each(|(g, &d)| *g += d);
        let mut dx = vec![T::zero(); self.inp];
        gemm_tn(self.inp, self.out, 1, &self.weight, dy, T::zero(), &mut dx);
        dx
    }
}

impl<T: Real> Params<T> for Dense<T> {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<ParamTensor<'a, T>>) {
        out.push(ParamTensor { name: format!("{prefix}.weight"), shape: vec![self.out, self.inp], data: &self.weight });
        out.push(ParamTensor { name: format!("{prefix}.bias"), shape: vec![self.out], data: &self.bias });
    }
    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamMut<'a, T>>) {
        out.push((format!("{prefix}.weight"), &mut self.weight));
        out.push((format!("{prefix}.bias"), &mut self.bias));
    }
}

#[inline]
pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Squeeze-excitation gate: `sigmoid(W2 · relu(W1 · v + b1) + b2)` with a
/// bottleneck of `⌈n / reduction⌉` units.
#[derive(Clone, Debug, PartialEq)]
pub struct SqueezeExcite<T> {
    pub(crate) fc1: Dense<T>,
    pub(crate) fc2: Dense<T>,
}

pub(crate) struct GateCache<T> {
    input: Vec<T>,
    hidden: Vec<T>,
    gate: Vec<T>,
}

impl<T: Real> SqueezeExcite<T> {
    pub fn bottleneck(n: usize, reduction: usize) -> usize {
        n.div_ceil(reduction).max(1)
    }

    pub fn init<R: Rng + ?Sized>(n: usize, reduction: usize, rng: &mut R) -> Self {
        let hidden = Self::bottleneck(n, reduction);
        SqueezeExcite { fc1: Dense::init(n, hidden, rng), fc2: Dense::init(hidden, n, rng) }
    }

    pub fn zeros(n: usize, reduction: usize) -> Self {
        let hidden = Self::bottleneck(n, reduction);
        SqueezeExcite { fc1: Dense::zeros(n, hidden), fc2: Dense::zeros(hidden, n) }
    }

    pub fn width(&self) -> usize {
        self.fc1.inp
    }

    pub fn fc1_mut(&mut self) -> &mut Dense<T> {
        &mut self.fc1
    }

    pub fn fc2_mut(&mut self) -> &mut Dense<T> {
        &mut self.fc2
    }

    pub fn forward(&self, v: &[T]) -> Vec<T> {
        self.forward_cached(v).gate
    }

    pub(crate) fn forward_cached(&self, v: &[T]) -> GateCache<T> {
        let mut hidden = self.fc1.forward(v);
        hidden.iter_mut().for_each(|h| *h = h.max(T::zero()));
        let gate = self.fc2.forward(&hidden).into_iter().map(sigmoid).collect();
        GateCache { input: v.to_vec(), hidden, gate }
    }

    pub(crate) fn gate<'a>(cache: &'a GateCache<T>) -> &'a [T] {
        &cache.gate
    }

    /// Returns the gradient with respect to the gate input.
    pub(crate) fn backward(&self, cache: &GateCache<T>, dgate: &[T], grad: &mut SqueezeExcite<T>) -> Vec<T> {
        let dz2: Vec<T> = cache.gate.iter().zip(dgate).map(|(&s, &g)| g * s * (T::one() - s)).collect();
        let mut dh = self.fc2.backward(&cache.hidden, &dz2, &mut grad.fc2);
        dh.iter_mut().zip(&cache.hidden).for_each(|(d, &h)| {
            if h <= T::zero() {
                *d = T::zero();
            }
        });
        self.fc1.backward(&cache.input, &dh, &mut grad.fc1)
    }
}

impl<T: Real> Params<T> for SqueezeExcite<T> {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<ParamTensor<'a, T>>) {
        self.fc1.collect(&format!("{prefix}.fc1"), out);
        self.fc2.collect(&format!("{prefix}.fc2"), out);
    }
    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamMut<'a, T>>) {
        self.fc1.collect_mut(&format!("{prefix}.fc1"), out);
        self.fc2.collect_mut(&format!("{prefix}.fc2"), out);
    }
}
