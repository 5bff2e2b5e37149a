//! The demosaicing network: residual convolutional backbone, spectral
//! attention, interpolation branch, parameter accounting and checkpoints.

mod attention;
mod checkpoint;
mod layers;
mod model;
mod params;

pub use attention::{channel_attention_vector, spatial_attention_matrix, Hsa, Lsa};
pub use checkpoint::{Checkpoint, TrainingMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use layers::{Conv2d, Dense, ParamTensor, SqueezeExcite};
pub use model::{Attention, AttentionKind, Model, ModelConfig, ResBlock, Trace};
pub use params::{
    count_params, hsa_param_count, hsa_weight_formula, lsa_bias_count, lsa_param_count, lsa_weight_formula, ParamRow,
    ParamTable,
};

/// `out(i,h,w) = fm(i,h,w) · Am_i(h,w) · Av_i` for an LSA module.
pub fn lsa_apply<T: crate::real::Real>(fm: &crate::cube::FeatureMap<T>, lsa: &Lsa<T>) -> crate::error::Result<crate::cube::FeatureMap<T>> {
    lsa.apply(fm)
}
