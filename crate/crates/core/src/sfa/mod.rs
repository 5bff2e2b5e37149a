//! Spectral filter array physics: periodic band layouts, mosaic sampling,
//! geometric transforms and phase rearrangement.

mod pattern;
mod sampling;
mod shuffle;
mod transform;

pub use pattern::SfaPattern;
pub use sampling::{mask_of, mosaic_sample, sparse_expand};
pub use shuffle::{inverse_pixel_shuffle, phase_means, pixel_shuffle};
pub use transform::{
    apply_transform, apply_transform_adjoint, random_transform, transformed_dims, FlipAxis,
    TransformKind, TransformPolicy, TransformSpec, RESIZE_RANGE,
};
