//! One optimization step of the equivariant objective.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cube::{Cube, Plane};
use crate::error::{Error, Result};
use crate::nn::Model;
use crate::real::Real;
use crate::sfa::{
    apply_transform, apply_transform_adjoint, mosaic_sample, random_transform, sparse_expand, SfaPattern,
    TransformPolicy, TransformSpec,
};

use super::loss::{cube_loss_with_grad, mosaic_loss_with_grad, LossConfig};
use super::optim::Adam;

/// Which objective a step optimizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Mosaic consistency plus transform equivariance; no ground truth.
    #[default]
    Unsupervised,
    /// Charbonnier against a ground-truth cube.
    Supervised,
}

/// Transform family used for the equivariance term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyChoice {
    Shift,
    /// Uniform over shift, flip, rotate and resize.
    #[default]
    Mixed,
    /// Identity transform.
    None,
    /// Selection weights over shift, flip, rotate, resize.
    Weighted([f64; 4]),
}

impl PolicyChoice {
    pub fn policy(self) -> Result<Option<TransformPolicy>> {
        Ok(match self {
            PolicyChoice::Shift => Some(TransformPolicy::shift_only()),
            PolicyChoice::Mixed => Some(TransformPolicy::mixed()),
            PolicyChoice::None => None,
            PolicyChoice::Weighted([a, b, c, d]) => Some(TransformPolicy::new(a, b, c, d)?),
        })
    }
}

impl std::str::FromStr for PolicyChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shift" => Ok(PolicyChoice::Shift),
            "mixed" => Ok(PolicyChoice::Mixed),
            "none" => Ok(PolicyChoice::None),
            other => {
                let weights = other
                    .strip_prefix("weighted:")
                    .map(|w| w.split(',').map(|v| v.trim().parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>());
                match weights {
                    Some(Ok(w)) if w.len() == 4 => {
                        let choice = PolicyChoice::Weighted([w[0], w[1], w[2], w[3]]);
                        choice.policy()?;
                        Ok(choice)
                    }
                    _ => Err(Error::Config(format!(
                        "unknown transform policy {other} (shift, mixed, none or weighted:S,F,R,Z)"
                    ))),
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub total: f64,
    pub cube: f64,
    pub mosaic: f64,
}

impl StepLosses {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.cube.is_finite() && self.mosaic.is_finite()
    }
}

/// A training sample: a mosaic patch and, for supervised runs, its cube.
#[derive(Clone, Debug)]
pub struct Sample<T> {
    pub mosaic: Plane<T>,
    pub target: Option<Cube<T>>,
}

/// Accumulates into `grads` the gradient of the equivariant objective on
/// one mosaic. `transform = None` is the identity.
pub fn unsupervised_gradients<T: Real>(
    model: &Model<T>,
    mosaic: &Plane<T>,
    pattern: &SfaPattern,
    transform: Option<&TransformSpec>,
    loss: &LossConfig,
    grads: &mut Model<T>,
) -> Result<StepLosses> {
    let (h, w) = mosaic.dims();
    let (x_hat, trace1) = model.forward_traced(mosaic, pattern)?;
    let x_hat_t = match transform {
        Some(t) => apply_transform(&x_hat, t, pattern)?,
        None => x_hat.clone(),
    };
    let y_t = mosaic_sample(&x_hat_t, pattern)?;
    let (x_tilde, trace2) = model.forward_traced(&y_t, pattern)?;

    let (l_cube, g_tilde) = cube_loss_with_grad(&x_tilde, &x_hat_t, loss.eps)?;
    let (l_mosaic, g_sampled) = mosaic_loss_with_grad(&x_hat, mosaic, pattern, loss.eps)?;
    let total = l_cube + loss.alpha * l_mosaic;
    let losses = StepLosses { total, cube: l_cube, mosaic: l_mosaic };
    if !losses.is_finite() {
        return Ok(losses);
    }

    let detach = loss.stop_gradient_pseudo_gt;
    let d_y_t = model.backward(trace2, &g_tilde, grads, pattern, !detach)?;
    let mut d_x_hat = sparse_expand(&g_sampled, pattern).map(|v| v * T::of(loss.alpha));
    if let Some(d_y_t) = d_y_t {
        // ∂/∂X̂′ collects −g from the cube loss and the re-sampling path.
        let mut d_x_hat_t = sparse_expand(&d_y_t, pattern);
        d_x_hat_t.axpy(-T::one(), &g_tilde)?;
        let back = match transform {
            Some(t) => apply_transform_adjoint(&d_x_hat_t, t, pattern, h, w)?,
            None => d_x_hat_t,
        };
        d_x_hat.axpy(T::one(), &back)?;
    }
    model.backward(trace1, &d_x_hat, grads, pattern, false)?;
    Ok(losses)
}

/// Accumulates the supervised objective's gradient; `cube` reports the
/// loss against the target and `mosaic` the consistency term (not trained).
pub fn supervised_gradients<T: Real>(
    model: &Model<T>,
    mosaic: &Plane<T>,
    target: &Cube<T>,
    pattern: &SfaPattern,
    loss: &LossConfig,
    grads: &mut Model<T>,
) -> Result<StepLosses> {
    let (x_hat, trace) = model.forward_traced(mosaic, pattern)?;
    let (l_cube, g) = cube_loss_with_grad(&x_hat, target, loss.eps)?;
    let (l_mosaic, _) = mosaic_loss_with_grad(&x_hat, mosaic, pattern, loss.eps)?;
    let losses = StepLosses { total: l_cube, cube: l_cube, mosaic: l_mosaic };
    if losses.is_finite() {
        model.backward(trace, &g, grads, pattern, false)?;
    }
    Ok(losses)
}

/// Mutable training state: parameters, gradient buffer and optimizer.
#[derive(Clone, Debug)]
pub struct TrainState<T> {
    pub model: Model<T>,
    pub optimizer: Adam<T>,
    grads: Model<T>,
    step: usize,
}

impl<T: Real> TrainState<T> {
    pub fn new(model: Model<T>, optimizer: Adam<T>) -> Self {
        let grads = model.zeros_like();
        TrainState { model, optimizer, grads, step: 0 }
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// Gradient of the last step, averaged over its batch.
    pub fn last_gradients(&self) -> &Model<T> {
        &self.grads
    }
}

/// Runs one update on `batch`. Transforms are drawn from `rng` per sample.
/// A non-finite loss aborts the step before any parameter changes.
pub fn train_step<T: Real, R: Rng + ?Sized>(
    state: &mut TrainState<T>,
    batch: &[Sample<T>],
    pattern: &SfaPattern,
    objective: Objective,
    policy: PolicyChoice,
    loss: &LossConfig,
    rng: &mut R,
) -> Result<StepLosses> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let policy = policy.policy()?;
    state.grads.for_each_param_mut(|_, g| g.fill(T::zero()));
    let mut sum = StepLosses::default();
    for sample in batch {
        let l = match objective {
            Objective::Unsupervised => {
                let spec = policy.as_ref().map(|p| random_transform(rng, pattern, p));
                unsupervised_gradients(&state.model, &sample.mosaic, pattern, spec.as_ref(), loss, &mut state.grads)?
            }
            Objective::Supervised => {
                let target = sample
                    .target
                    .as_ref()
                    .ok_or_else(|| Error::Config("supervised training needs ground-truth cubes".into()))?;
                supervised_gradients(&state.model, &sample.mosaic, target, pattern, loss, &mut state.grads)?
            }
        };
        if !l.is_finite() {
            return Err(Error::NonFiniteLoss { step: state.step, cube: l.cube, mosaic: l.mosaic });
        }
        sum.total += l.total;
        sum.cube += l.cube;
        sum.mosaic += l.mosaic;
    }
    let n = batch.len() as f64;
    if batch.len() > 1 {
        let inv = T::of(1.0 / n);
        state.grads.for_each_param_mut(|_, g| g.iter_mut().for_each(|v| *v *= inv));
    }
    state.optimizer.update(&mut state.model, &state.grads);
    state.step += 1;
    Ok(StepLosses { total: sum.total / n, cube: sum.cube / n, mosaic: sum.mosaic / n })
}
