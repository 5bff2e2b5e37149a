//! Desk-scale training run on generated scenes, as used by the acceptance
//! criteria, with knobs for exploring other settings.
//!
//! `cargo run --release -p usd-core --example desk_scale -- [steps] [patch] [lr] [policy] [branch] [seed] [scene_seed]`
//!
//! `policy` is `shift`, `mixed`, `none`, `weighted:S,F,R,Z` or `supervised`.
//! Scene knobs come from the environment: `CPLX`, `EDGE`, `TEX`, `TEXN`,
//! `SHAPES`, `SMIN`, `SMAX`, `FMIN`, `FMAX`. `STOPGRAD=1` detaches the
//! pseudo ground truth, `ALPHA` weighs the mosaic term, `SINGLE=n` trains on
//! one n×n patch of an extra scene, `VERBOSE=1` prints every evaluation.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use usd_core::io::{generate_scene, SceneParams};
use usd_core::nn::ModelConfig;
use usd_core::sfa::{mosaic_sample, SfaPattern};
use usd_core::train::{fit, init_model, PolicyChoice, Sample, TrainConfig};
use usd_core::wb_interpolate;

fn main() -> usd_core::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: &str| args.get(i).cloned().unwrap_or_else(|| d.to_string());
    let steps: usize = arg(0, "2000").parse().unwrap();
    let patch: usize = arg(1, "48").parse().unwrap();
    let lr: f64 = arg(2, "1e-3").parse().unwrap();
    let supervised = arg(3, "mixed") == "supervised";
    let policy: PolicyChoice = if supervised { PolicyChoice::Mixed } else { arg(3, "mixed").parse()? };
    let branch: bool = arg(4, "true").parse().unwrap();
    let seed: u64 = arg(5, "0").parse().unwrap();
    let scene_seed: u64 = arg(6, "2024").parse().unwrap();

    let pattern = SfaPattern::row_major(4, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(scene_seed);
    let env = |k: &str, d: f64| std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d);
    let sp = SceneParams {
        complexity: env("CPLX", 1.0),
        edge: env("EDGE", 0.5),
        texture: env("TEX", 0.2),
        shapes: env("SHAPES", 30.0) as usize,
        shape_size: (env("SMIN", 0.05), env("SMAX", 0.3)),
        texture_components: env("TEXN", 6.0) as usize,
        texture_freq: (env("FMIN", 0.6), env("FMAX", 1.4)),
        ..Default::default()
    };
    let single: usize = env("SINGLE", 0.0) as usize;
    let val: Vec<Sample<f64>> = (0..5)
        .map(|_| {
            let cube = generate_scene(&mut rng, 128, 128, 16, &sp);
            Sample { mosaic: mosaic_sample(&cube, &pattern).unwrap(), target: Some(cube) }
        })
        .collect();
    let n = val.len() as f64;
    let pool: Vec<Sample<f64>> = if single > 0 {
        let cube = generate_scene(&mut rng, 128, 128, 16, &sp).crop(32, 32, single, single)?;
        vec![Sample { mosaic: mosaic_sample(&cube, &pattern)?, target: Some(cube) }]
    } else {
        val.clone()
    };
    let train: Vec<Sample<f32>> = pool
        .iter()
        .map(|s| Sample { mosaic: s.mosaic.cast(), target: if supervised { s.target.as_ref().map(|t| t.cast()) } else { None } })
        .collect();
    let wb: f64 = val
        .iter()
        .map(|s| usd_core::metrics::psnr(&wb_interpolate(&s.mosaic, &pattern), s.target.as_ref().unwrap(), 1.0).unwrap())
        .sum::<f64>()
        / n;
    let gt_sei: f64 = val.iter().map(|s| usd_core::cube_sei(s.target.as_ref().unwrap(), &pattern).sei).sum::<f64>() / n;
    let wb_sei: f64 = val.iter().map(|s| usd_core::cube_sei(&wb_interpolate(&s.mosaic, &pattern), &pattern).sei).sum::<f64>() / n;
    println!("WB psnr {wb:.3}, sei gt {gt_sei:.3e} wb {wb_sei:.3e}");
    let config = ModelConfig { channels: 32, blocks: 2, interp_branch: branch, ..ModelConfig::for_pattern(&pattern) };
    let model = init_model::<f32>(config, seed)?;
    let cfg = TrainConfig {
        learning_rate: lr,
        patch_size: patch,
        max_epochs: steps / train.len(),
        eval_every: (steps / train.len() / 16).max(1),
        policy,
        seed,
        objective: if supervised { usd_core::train::Objective::Supervised } else { Default::default() },
        loss: usd_core::train::LossConfig {
            stop_gradient_pseudo_gt: std::env::var("STOPGRAD").is_ok(),
            alpha: std::env::var("ALPHA").ok().and_then(|v| v.parse().ok()).unwrap_or(1.0),
            ..Default::default()
        },
        ..Default::default()
    };
    let t = Instant::now();
    let out = fit(model, &pattern, &train, &val, &cfg, None)?;
    let evals: Vec<_> = out.evaluations().collect();
    if std::env::var("VERBOSE").is_ok() {
        for r in &evals {
            println!("epoch {:4} cube {:.4e} mosaic {:.4e} sei {:.3e} psnr {:.3}", r.epoch, r.cube_loss.unwrap_or(0.0), r.mosaic_loss.unwrap_or(0.0), r.sei.unwrap(), r.psnr.unwrap());
        }
    }
    let peak = evals.iter().max_by(|a, b| a.psnr.unwrap().total_cmp(&b.psnr.unwrap())).unwrap();
    let best_sei = evals.iter().min_by(|a, b| a.sei.unwrap().total_cmp(&b.sei.unwrap())).unwrap();
    let last = evals.last().unwrap();
    println!(
        "wb {wb:.2} | peak {:+.2} @{} | argmin-sei {:+.2} @{} | final {:+.2} sei {:.2e} | {:.0}s",
        peak.psnr.unwrap() - wb,
        peak.epoch,
        best_sei.psnr.unwrap() - wb,
        best_sei.epoch,
        last.psnr.unwrap() - wb,
        last.sei.unwrap(),
        t.elapsed().as_secs_f64()
    );
    Ok(())
}
