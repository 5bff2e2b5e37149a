//! Outer training loop: patch sampling, periodic SEI evaluation, early
//! stopping, history and checkpoints.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cube::Cube;
use crate::error::{Error, Result};
use crate::io::{patch_windows, write_atomic};
use crate::metrics::{evaluate, MetricOptions};
use crate::nn::{Checkpoint, Model, ModelConfig, TrainingMeta};
use crate::real::Real;
use crate::sei::{cube_sei, should_stop, SeiPoint};
use crate::sfa::SfaPattern;

use super::loss::LossConfig;
use super::optim::{Adam, AdamConfig};
use super::step::{train_step, Objective, PolicyChoice, Sample, TrainState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Square patch side, snapped down to whole SFA periods.
    pub patch_size: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub policy: PolicyChoice,
    pub objective: Objective,
    pub seed: u64,
    /// Epochs between SEI evaluations.
    pub eval_every: usize,
    /// Early-stopping threshold; absent means train to `max_epochs`.
    pub sei_max: Option<f64>,
    pub loss: LossConfig,
    /// Keep a checkpoint at every evaluation, not only `best` and `last`.
    pub keep_checkpoints: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            patch_size: 100,
            batch_size: 1,
            max_epochs: 1000,
            policy: PolicyChoice::Mixed,
            objective: Objective::Unsupervised,
            seed: 0,
            eval_every: 50,
            sei_max: None,
            loss: LossConfig::default(),
            keep_checkpoints: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.patch_size == 0 || self.batch_size == 0 || self.eval_every == 0 {
            return Err(Error::Config("patch_size, batch_size and eval_every must be positive".into()));
        }
        Ok(())
    }
}

/// One line of the run history. SEI and metrics are present on
/// evaluation epochs only; losses are epoch means and absent at epoch 0.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub step: usize,
    pub cube_loss: Option<f64>,
    pub mosaic_loss: Option<f64>,
    pub sei: Option<f64>,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub sam: Option<f64>,
    pub ergas: Option<f64>,
}

/// Validation summary averaged over images.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Evaluation {
    pub sei: f64,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub sam: Option<f64>,
    pub ergas: Option<f64>,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// SEI of the model's outputs on `val`, plus metrics when every sample
/// carries ground truth.
pub fn evaluate_model<T: Real>(model: &Model<T>, pattern: &SfaPattern, val: &[Sample<f64>]) -> Result<Evaluation> {
    if val.is_empty() {
        return Err(Error::Config("validation set is empty".into()));
    }
    let opts = MetricOptions::default().with_mosaic_ratio(pattern.r1(), pattern.r2());
    let mut seis = Vec::with_capacity(val.len());
    let mut reports = Vec::new();
    for s in val {
        let out: Cube<f64> = model.forward(&s.mosaic.cast(), pattern)?.cast();
        seis.push(cube_sei(&out, pattern).sei);
        if let Some(gt) = &s.target {
            reports.push(evaluate(&out, gt, &opts)?);
        }
    }
    let sei = seis.iter().sum::<f64>() / seis.len() as f64;
    if reports.len() != val.len() {
        return Ok(Evaluation { sei, ..Default::default() });
    }
    Ok(Evaluation {
        sei,
        psnr: mean(reports.iter().map(|r| r.psnr)),
        ssim: mean(reports.iter().map(|r| r.ssim)),
        sam: mean(reports.iter().filter_map(|r| r.sam)),
        ergas: mean(reports.iter().filter_map(|r| r.ergas)),
    })
}

/// Result of [`fit`].
#[derive(Clone, Debug)]
pub struct FitOutcome<T> {
    /// Parameters after the last completed epoch.
    pub model: Model<T>,
    /// Lowest-SEI evaluation and its parameters.
    pub best_epoch: usize,
    pub best_model: Model<T>,
    pub history: Vec<HistoryRow>,
    pub sei_history: Vec<SeiPoint>,
    pub epochs: usize,
    pub steps: usize,
    pub stopped_early: bool,
}

impl<T> FitOutcome<T> {
    /// Evaluation rows only.
    pub fn evaluations(&self) -> impl Iterator<Item = &HistoryRow> {
        self.history.iter().filter(|r| r.sei.is_some())
    }
}

/// Fresh model for `config`, initialized from `seed`.
pub fn init_model<T: Real>(config: ModelConfig, seed: u64) -> Result<Model<T>> {
    Model::new(config, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Where a run writes its artifacts.
#[derive(Clone, Debug)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(RunDir { root: root.to_path_buf() })
    }

    pub fn history(&self) -> PathBuf {
        self.root.join("history.csv")
    }

    pub fn best(&self) -> PathBuf {
        self.root.join("best.ckpt")
    }

    pub fn last(&self) -> PathBuf {
        self.root.join("last.ckpt")
    }

    pub fn epoch(&self, epoch: usize) -> PathBuf {
        self.root.join(format!("epoch_{epoch:06}.ckpt"))
    }
}

pub fn write_history(path: &Path, rows: &[HistoryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

pub fn read_history(path: &Path) -> Result<Vec<HistoryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Trains `model` on random patches of `train`, evaluating SEI on `val`
/// every `eval_every` epochs (and at epochs 0 and the last). One epoch
/// draws one patch per training image.
pub fn fit<T: Real>(
    model: Model<T>,
    pattern: &SfaPattern,
    train: &[Sample<T>],
    val: &[Sample<f64>],
    config: &TrainConfig,
    run: Option<&RunDir>,
) -> Result<FitOutcome<T>> {
    config.validate()?;
    model.config().check_pattern(pattern)?;
    if train.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if config.objective == Objective::Supervised && train.iter().any(|s| s.target.is_none()) {
        return Err(Error::Config("supervised training needs ground-truth cubes".into()));
    }
    let sei_max = config.sei_max.unwrap_or(f64::INFINITY);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let adam = Adam::new(AdamConfig { learning_rate: config.learning_rate, ..Default::default() }, &model);
    let mut state = TrainState::new(model, adam);

    let mut history = Vec::new();
    let mut sei_history = Vec::new();
    let mut best_model = state.model.clone();
    let mut best_epoch = 0;
    let mut stopped_early = false;
    let mut epoch = 0;

    let meta = |epoch: usize, step: usize, sei_history: &[SeiPoint]| TrainingMeta {
        epoch,
        step,
        seed: config.seed,
        sei_history: sei_history.to_vec(),
    };

    loop {
        let mut row = HistoryRow { epoch, step: state.step_count(), ..Default::default() };
        if epoch > 0 {
            let mut order: Vec<usize> = (0..train.len()).collect();
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
            let (mut cube, mut mosaic, mut steps) = (0.0, 0.0, 0);
            for chunk in order.chunks(config.batch_size) {
                let mut batch = Vec::with_capacity(chunk.len());
                for &i in chunk {
                    let s = &train[i];
                    let (h, w) = s.mosaic.dims();
                    let win = patch_windows(h, w, config.patch_size, 1, pattern, &mut rng)?[0];
                    batch.push(Sample {
                        mosaic: s.mosaic.crop(win.top, win.left, win.height, win.width)?,
                        target: match &s.target {
                            Some(t) => Some(t.crop(win.top, win.left, win.height, win.width)?),
                            None => None,
                        },
                    });
                }
                let l = train_step(&mut state, &batch, pattern, config.objective, config.policy, &config.loss, &mut rng)?;
                cube += l.cube;
                mosaic += l.mosaic;
                steps += 1;
            }
            row.step = state.step_count();
            row.cube_loss = Some(cube / steps as f64);
            row.mosaic_loss = Some(mosaic / steps as f64);
        }

        let last = epoch == config.max_epochs;
        if epoch % config.eval_every == 0 || last {
            let ev = evaluate_model(&state.model, pattern, val)?;
            row.sei = Some(ev.sei);
            row.psnr = ev.psnr;
            row.ssim = ev.ssim;
            row.sam = ev.sam;
            row.ergas = ev.ergas;
            sei_history.push(SeiPoint { epoch, sei: ev.sei });
            let decision = should_stop(&sei_history, sei_max);
            let improved = decision.best == Some(sei_history.len() - 1);
            if improved {
                best_model = state.model.clone();
                best_epoch = epoch;
            }
            log::info!(
                "epoch {epoch} step {} cube {:.3e} mosaic {:.3e} sei {:.3e}{}",
                row.step,
                row.cube_loss.unwrap_or(f64::NAN),
                row.mosaic_loss.unwrap_or(f64::NAN),
                ev.sei,
                ev.psnr.map(|p| format!(" psnr {p:.2}")).unwrap_or_default()
            );
            if let Some(run) = run {
                let ckpt = Checkpoint {
                    model: state.model.clone(),
                    pattern: pattern.clone(),
                    meta: meta(epoch, state.step_count(), &sei_history),
                };
                if config.keep_checkpoints {
                    ckpt.save(&run.epoch(epoch))?;
                }
                if improved {
                    ckpt.save(&run.best())?;
                }
            }
            history.push(row);
            if let Some(run) = run {
                write_history(&run.history(), &history)?;
            }
            if decision.stop {
                log::info!("SEI {:.3e} exceeds {sei_max:.3e}; stopping at epoch {epoch}", ev.sei);
                stopped_early = true;
                break;
            }
        } else {
            history.push(row);
        }
        if last {
            break;
        }
        epoch += 1;
    }

    if let Some(run) = run {
        write_history(&run.history(), &history)?;
        Checkpoint { model: state.model.clone(), pattern: pattern.clone(), meta: meta(epoch, state.step_count(), &sei_history) }
            .save(&run.last())?;
    }
    Ok(FitOutcome {
        steps: state.step_count(),
        model: state.model,
        best_epoch,
        best_model,
        history,
        sei_history,
        epochs: epoch,
        stopped_early,
    })
}
