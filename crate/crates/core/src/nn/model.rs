use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cube::{Cube, Plane, SpectralCube};
use crate::error::{Error, Result};
use crate::interp::{wb_adjoint, wb_interpolate};
use crate::real::Real;
use crate::sfa::{mosaic_sample, sparse_expand, SfaPattern};

use super::attention::{Hsa, HsaCache, Lsa, LsaCache};
use super::layers::{Conv2d, ConvCache, ParamMut, ParamTensor, Params};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionKind {
    None,
    #[default]
    Lsa,
    Hsa,
}

/// Architecture of the demosaicing network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub bands: usize,
    pub r1: usize,
    pub r2: usize,
    /// Feature channels C.
    pub channels: usize,
    /// Residual blocks K.
    pub blocks: usize,
    /// Attention reduction ratio d.
    pub reduction: usize,
    pub residual_scale: f64,
    pub attention: AttentionKind,
    /// Add the WB cube to the output and feed it to the network.
    pub interp_branch: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            bands: 25,
            r1: 5,
            r2: 5,
            channels: 64,
            blocks: 4,
            reduction: 4,
            residual_scale: 1.0,
            attention: AttentionKind::Lsa,
            interp_branch: true,
        }
    }
}

impl ModelConfig {
    pub fn for_pattern(pattern: &SfaPattern) -> Self {
        ModelConfig { bands: pattern.bands(), r1: pattern.r1(), r2: pattern.r2(), ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bands == 0 || self.r1 == 0 || self.r2 == 0 {
            return Err(Error::Config("bands and period must be positive".into()));
        }
        if self.reduction == 0 || self.channels < self.reduction {
            return Err(Error::Config(format!(
                "need channels ≥ reduction ≥ 1 (channels {}, reduction {})",
                self.channels, self.reduction
            )));
        }
        if !self.residual_scale.is_finite() {
            return Err(Error::Config("residual_scale must be finite".into()));
        }
        Ok(())
    }

    pub fn check_pattern(&self, pattern: &SfaPattern) -> Result<()> {
        if (pattern.bands(), pattern.r1(), pattern.r2()) != (self.bands, self.r1, self.r2) {
            return Err(Error::Config(format!(
                "pattern {}×{} with {} bands does not match model {}×{} with {} bands",
                pattern.r1(),
                pattern.r2(),
                pattern.bands(),
                self.r1,
                self.r2,
                self.bands
            )));
        }
        Ok(())
    }

    pub fn input_channels(&self) -> usize {
        if self.interp_branch {
            2 * self.bands
        } else {
            self.bands
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Attention<T> {
    None,
    Lsa(Lsa<T>),
    Hsa(Hsa<T>),
}

enum AttentionCache<T> {
    None,
    Lsa(LsaCache<T>),
    Hsa(HsaCache<T>),
}

/// conv → ReLU → conv, identity skip, then spectral attention.
#[derive(Clone, Debug, PartialEq)]
pub struct ResBlock<T> {
    pub(crate) conv1: Conv2d<T>,
    pub(crate) conv2: Conv2d<T>,
    pub(crate) attention: Attention<T>,
}

struct BlockTrace<T> {
    conv1: ConvCache<T>,
    activation: Cube<T>,
    conv2: ConvCache<T>,
    attention: AttentionCache<T>,
}

impl<T: Real> ResBlock<T> {
    fn forward(&self, x: Cube<T>) -> Result<(Cube<T>, BlockTrace<T>)> {
        let (mut a, conv1) = self.conv1.forward(&x);
        a.as_mut_slice().iter_mut().for_each(|v| *v = v.max(T::zero()));
        let (mut y, conv2) = self.conv2.forward(&a);
        y.axpy(T::one(), &x)?;
        let (z, attention) = match &self.attention {
            Attention::None => (y, AttentionCache::None),
            Attention::Lsa(m) => {
                let (z, c) = m.forward(&y)?;
                (z, AttentionCache::Lsa(c))
            }
            Attention::Hsa(m) => {
                let (z, c) = m.forward(&y)?;
                (z, AttentionCache::Hsa(c))
            }
        };
        Ok((z, BlockTrace { conv1, activation: a, conv2, attention }))
    }

    fn backward(&self, trace: BlockTrace<T>, dz: Cube<T>, grad: &mut ResBlock<T>) -> Cube<T> {
        let dy = match (&self.attention, trace.attention, &mut grad.attention) {
            (Attention::None, AttentionCache::None, _) => dz,
            (Attention::Lsa(m), AttentionCache::Lsa(c), Attention::Lsa(g)) => m.backward(c, &dz, g),
            (Attention::Hsa(m), AttentionCache::Hsa(c), Attention::Hsa(g)) => m.backward(c, &dz, g),
            _ => unreachable!("gradient model mirrors the parameter model"),
        };
        let mut da = self.conv2.backward(trace.conv2, &dy, &mut grad.conv2, true).expect("input gradient requested");
        for (d, &a) in da.as_mut_slice().iter_mut().zip(trace.activation.as_slice()) {
            if a <= T::zero() {
                *d = T::zero();
            }
        }
        let mut dx = self.conv1.backward(trace.conv1, &da, &mut grad.conv1, true).expect("input gradient requested");
        dx.axpy(T::one(), &dy).expect("same shape");
        dx
    }
}

impl<T: Real> Params<T> for ResBlock<T> {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<ParamTensor<'a, T>>) {
        self.conv1.collect(&format!("{prefix}.conv1"), out);
        self.conv2.collect(&format!("{prefix}.conv2"), out);
        match &self.attention {
            Attention::None => {}
            Attention::Lsa(m) => m.collect(&format!("{prefix}.lsa"), out),
            Attention::Hsa(m) => m.collect(&format!("{prefix}.hsa"), out),
        }
    }
    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamMut<'a, T>>) {
        self.conv1.collect_mut(&format!("{prefix}.conv1"), out);
        self.conv2.collect_mut(&format!("{prefix}.conv2"), out);
        match &mut self.attention {
            Attention::None => {}
            Attention::Lsa(m) => m.collect_mut(&format!("{prefix}.lsa"), out),
            Attention::Hsa(m) => m.collect_mut(&format!("{prefix}.hsa"), out),
        }
    }
}

/// The demosaicing network `F(Y; θ)`:
/// `F(Y) = WB(Y) + s · tail(blocks(stem(sparse(Y) ⊕ WB(Y))))`.
///
/// Without the interpolation branch the input is `sparse(Y)` alone and the
/// WB term is dropped from the output.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    config: ModelConfig,
    pub(crate) stem: Conv2d<T>,
    pub(crate) blocks: Vec<ResBlock<T>>,
    pub(crate) tail: Conv2d<T>,
}

/// Everything the backward pass needs from one forward evaluation.
pub struct Trace<T> {
    height: usize,
    width: usize,
    stem: ConvCache<T>,
    blocks: Vec<BlockTrace<T>>,
    tail: ConvCache<T>,
}

impl<T: Real> Model<T> {
    /// Random initialization with a zero tail, so a fresh model with the
    /// interpolation branch reproduces WB exactly.
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let c = config.channels;
        let stem = Conv2d::init(config.input_channels(), c, rng);
        let blocks = (0..config.blocks)
            .map(|_| ResBlock {
                conv1: Conv2d::init(c, c, rng),
                conv2: Conv2d::init(c, c, rng),
                attention: match config.attention {
                    AttentionKind::None => Attention::None,
                    AttentionKind::Lsa => Attention::Lsa(Lsa::init(c, config.r1, config.r2, config.reduction, rng)),
                    AttentionKind::Hsa => Attention::Hsa(Hsa::init(c, config.r1, config.r2, config.reduction, rng)),
                },
            })
            .collect();
        let tail = Conv2d::zeros(c, config.bands);
        Ok(Model { config, stem, blocks, tail })
    }

    /// All-zero parameters for `config`.
    pub fn zeroed(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let c = config.channels;
        let blocks = (0..config.blocks)
            .map(|_| ResBlock {
                conv1: Conv2d::zeros(c, c),
                conv2: Conv2d::zeros(c, c),
                attention: match config.attention {
                    AttentionKind::None => Attention::None,
                    AttentionKind::Lsa => Attention::Lsa(Lsa::zeros(c, config.r1, config.r2, config.reduction)),
                    AttentionKind::Hsa => Attention::Hsa(Hsa::zeros(c, config.r1, config.r2, config.reduction)),
                },
            })
            .collect();
        Ok(Model {
            stem: Conv2d::zeros(config.input_channels(), c),
            blocks,
            tail: Conv2d::zeros(c, config.bands),
            config,
        })
    }

    /// Gradient buffer with this model's structure.
    pub fn zeros_like(&self) -> Self {
        Self::zeroed(self.config.clone()).expect("config already validated")
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn stem_mut(&mut self) -> &mut Conv2d<T> {
        &mut self.stem
    }

    pub fn tail_mut(&mut self) -> &mut Conv2d<T> {
        &mut self.tail
    }

    pub fn blocks_mut(&mut self) -> &mut [ResBlock<T>] {
        &mut self.blocks
    }

    /// Named parameter tensors in a fixed order.
    pub fn tensors(&self) -> Vec<ParamTensor<'_, T>> {
        let mut out = Vec::new();
        self.stem.collect("stem", &mut out);
        for (i, b) in self.blocks.iter().enumerate() {
            b.collect(&format!("blocks.{i}"), &mut out);
        }
        self.tail.collect("tail", &mut out);
        out
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<ParamMut<'_, T>> {
        let mut out = Vec::new();
        self.stem.collect_mut("stem", &mut out);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.collect_mut(&format!("blocks.{i}"), &mut out);
        }
        self.tail.collect_mut("tail", &mut out);
        out
    }

    /// Visits every parameter buffer mutably, in [`Model::tensors`] order.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(&str, &mut [T])) {
        for (name, data) in self.tensors_mut() {
            f(&name, data);
        }
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        let mut out = Model::<U>::zeroed(self.config.clone()).expect("config already validated");
        let src: Vec<Vec<T>> = self.tensors().into_iter().map(|t| t.data.to_vec()).collect();
        for ((_, dst), s) in out.tensors_mut().into_iter().zip(src) {
            for (d, v) in dst.iter_mut().zip(s) {
                *d = U::of(v.f64());
            }
        }
        out
    }

    fn check_input(&self, mosaic: &Plane<T>, pattern: &SfaPattern) -> Result<()> {
        self.config.check_pattern(pattern)?;
        pattern.check_aligned(mosaic.height(), mosaic.width())
    }

    pub fn forward(&self, mosaic: &Plane<T>, pattern: &SfaPattern) -> Result<SpectralCube<T>> {
        Ok(self.forward_traced(mosaic, pattern)?.0)
    }

    pub fn forward_traced(&self, mosaic: &Plane<T>, pattern: &SfaPattern) -> Result<(SpectralCube<T>, Trace<T>)> {
        self.check_input(mosaic, pattern)?;
        let sparse = sparse_expand(mosaic, pattern);
        let (input, wb) = if self.config.interp_branch {
            let wb = wb_interpolate(mosaic, pattern);
            (sparse.concat_bands(&wb)?, Some(wb))
        } else {
            (sparse, None)
        };
        let (mut x, stem) = self.stem.forward(&input);
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (y, t) = block.forward(x)?;
            blocks.push(t);
            x = y;
        }
        let (residual, tail) = self.tail.forward(&x);
        let scale = T::of(self.config.residual_scale);
        let out = match wb {
            Some(mut wb) => {
                wb.axpy(scale, &residual)?;
                wb
            }
            None => residual.map(|v| v * scale),
        };
        let trace = Trace { height: mosaic.height(), width: mosaic.width(), stem, blocks, tail };
        Ok((out, trace))
    }

    /// Back-propagates `grad_out` (∂L/∂output) through a recorded forward
    /// pass, accumulating parameter gradients into `grads`. With
    /// `input_grad`, also returns ∂L/∂mosaic.
    pub fn backward(
        &self,
        trace: Trace<T>,
        grad_out: &SpectralCube<T>,
        grads: &mut Model<T>,
        pattern: &SfaPattern,
        input_grad: bool,
    ) -> Result<Option<Plane<T>>> {
        if grad_out.dims() != (self.config.bands, trace.height, trace.width) {
            return Err(Error::Shape(format!("output gradient {:?} does not match the trace", grad_out.dims())));
        }
        let scale = T::of(self.config.residual_scale);
        let d_residual = grad_out.map(|v| v * scale);
        let mut dx = self.tail.backward(trace.tail, &d_residual, &mut grads.tail, true).expect("requested");
        for ((block, t), g) in self.blocks.iter().zip(trace.blocks).zip(grads.blocks.iter_mut()).rev() {
            dx = block.backward(t, dx, g);
        }
        let d_input = self.stem.backward(trace.stem, &dx, &mut grads.stem, input_grad);
        let Some(d_input) = d_input else {
            return Ok(None);
        };
        let b = self.config.bands;
        let (h, w) = (trace.height, trace.width);
        let d_sparse = Cube::from_vec(b, h, w, d_input.as_slice()[..b * h * w].to_vec())?;
        let mut d_mosaic = mosaic_sample(&d_sparse, pattern)?;
        if self.config.interp_branch {
            let mut d_wb = Cube::from_vec(b, h, w, d_input.as_slice()[b * h * w..].to_vec())?;
            d_wb.axpy(T::one(), grad_out)?;
            let via_wb = wb_adjoint(&d_wb, pattern);
            d_mosaic.as_mut_slice().iter_mut().zip(via_wb.as_slice()).for_each(|(a, &v)| *a += v);
        }
        Ok(Some(d_mosaic))
    }

    /// Multiply-accumulates of one forward pass on an `h × w` mosaic
    /// (convolutions only).
    pub fn forward_macs(&self, h: usize, w: usize) -> u64 {
        self.stem.macs(h, w)
            + self.blocks.iter().map(|b| b.conv1.macs(h, w) + b.conv2.macs(h, w)).sum::<u64>()
            + self.tail.macs(h, w)
    }
}
