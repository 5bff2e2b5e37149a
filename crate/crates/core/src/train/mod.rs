//! Losses, optimizer and the unsupervised training loop.

mod fit;
mod loss;
mod optim;
mod step;

pub use fit::{
    evaluate_model, fit, init_model, read_history, write_history, Evaluation, FitOutcome, HistoryRow, RunDir,
    TrainConfig,
};
pub use loss::{charbonnier, charbonnier_with_grad, cube_loss, cube_loss_with_grad, mosaic_loss, mosaic_loss_with_grad, LossConfig};
pub use optim::{Adam, AdamConfig};
pub use step::{
    supervised_gradients, train_step, unsupervised_gradients, Objective, PolicyChoice, Sample, StepLosses, TrainState,
};
