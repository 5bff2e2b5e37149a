//! Unsupervised spectral demosaicing.
//!
//! A demosaicing network is trained from raw SFA mosaics alone: a mosaic
//! consistency term keeps the re-sampled output on the measurement, and an
//! equivariance term asks the network to commute with random geometric
//! transforms. Training stops early on a self-evaluation index (SEI) of the output.

pub mod cube;
pub mod error;
pub mod interp;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod real;
pub mod sei;
pub mod sfa;
pub mod train;

pub use cube::{Cube, FeatureMap, MosaicImage, Plane, SpectralCube};
pub use error::{Error, Result};
pub use interp::{wb_adjoint, wb_interpolate};
pub use metrics::{evaluate, MetricOptions, MetricReport};
pub use nn::{AttentionKind, Checkpoint, Model, ModelConfig};
pub use real::Real;
pub use sei::{cube_sei, should_stop, SeiPoint, SeiReport};
pub use sfa::{mosaic_sample, SfaPattern, TransformPolicy, TransformSpec};
pub use train::{fit, LossConfig, TrainConfig};
