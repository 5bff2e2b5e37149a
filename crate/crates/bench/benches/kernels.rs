use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use usd_core::interp::wb_interpolate;
use usd_core::metrics::{evaluate, MetricOptions};
use usd_core::nn::{AttentionKind, ModelConfig};
use usd_core::sei::cube_sei;
use usd_core::sfa::{mosaic_sample, SfaPattern};
use usd_core::train::{init_model, train_step, Adam, AdamConfig, LossConfig, Objective, PolicyChoice, Sample, TrainState};
use usd_core::{Cube, Plane};

fn random_plane(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Plane<f32> {
    Plane::from_fn(h, w, |_, _| rng.random::<f32>())
}

fn interp(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut group = c.benchmark_group("wb_interpolate");
    for r in [2usize, 4, 5] {
        let p = SfaPattern::row_major(r, r);
        let y = random_plane(&mut rng, 25 * r, 25 * r);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{r}x{r}")), &y, |b, y| b.iter(|| wb_interpolate(black_box(y), &p)));
    }
    group.finish();
}

fn forward(c: &mut Criterion) {
    let p = SfaPattern::row_major(4, 4);
    let y = random_plane(&mut ChaCha8Rng::seed_from_u64(1), 64, 64);
    let mut group = c.benchmark_group("forward_64x64_c32_k2");
    group.sample_size(20);
    for attention in [AttentionKind::None, AttentionKind::Lsa, AttentionKind::Hsa] {
        let cfg = ModelConfig { channels: 32, blocks: 2, attention, ..ModelConfig::for_pattern(&p) };
        let model = init_model::<f32>(cfg, 0).unwrap();
        group.bench_function(format!("{attention:?}"), |b| b.iter(|| model.forward(black_box(&y), &p).unwrap()));
    }
    group.finish();
}

fn step(c: &mut Criterion) {
    let p = SfaPattern::row_major(4, 4);
    let cfg = ModelConfig { channels: 32, blocks: 2, ..ModelConfig::for_pattern(&p) };
    let model = init_model::<f32>(cfg, 0).unwrap();
    let mut state = TrainState::new(model.clone(), Adam::new(AdamConfig::default(), &model));
    let batch = [Sample { mosaic: random_plane(&mut ChaCha8Rng::seed_from_u64(2), 48, 48), target: None }];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut group = c.benchmark_group("train_step_48x48");
    group.sample_size(10);
    for (name, policy) in [("shift", PolicyChoice::Shift), ("mixed", PolicyChoice::Mixed)] {
        group.bench_function(name, |b| {
            b.iter(|| train_step(&mut state, &batch, &p, Objective::Unsupervised, policy, &LossConfig::default(), &mut rng).unwrap())
        });
    }
    group.finish();
}

fn quality(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = SfaPattern::row_major(4, 4);
    let x = Cube::<f64>::from_fn(16, 128, 128, |_, _, _| rng.random());
    let y = Cube::<f64>::from_fn(16, 128, 128, |b, h, w| (x.get(b, h, w) + 0.05 * rng.random::<f64>()).min(1.0));
    let opts = MetricOptions::default().with_mosaic_ratio(4, 4);
    c.bench_function("metrics_128x128x16", |b| b.iter(|| evaluate(black_box(&y), &x, &opts).unwrap()));
    c.bench_function("cube_sei_128x128x16", |b| b.iter(|| cube_sei(black_box(&y), &p)));
    c.bench_function("mosaic_sample_128x128x16", |b| b.iter(|| mosaic_sample(black_box(&y), &p).unwrap()));
}

criterion_group!(benches, interp, forward, step, quality);
criterion_main!(benches);
