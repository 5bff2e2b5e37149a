use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, ensure, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use usd_core::io::{
    generate_scene, load_cube, make_ssf_bank, normalize_max, save_cube, save_mosaic_png, spectral_resample, write_atomic,
    CubeFile, DatasetManifest, ManifestEntry, SceneParams, Split,
};
use usd_core::metrics::{evaluate as evaluate_metrics, MetricOptions};
use usd_core::nn::{
    count_params, hsa_param_count, hsa_weight_formula, lsa_param_count, lsa_weight_formula, Checkpoint, Model,
};
use usd_core::sei::{cube_sei, should_stop, SeiPoint};
use usd_core::sfa::{mosaic_sample, SfaPattern};
use usd_core::train::{fit, init_model, read_history, HistoryRow, Objective, RunDir};
use usd_core::Cube;

use crate::config::{parse_pattern, RunConfig};
use crate::data::{load_input, split_files, training_samples, validation_samples};
use crate::{
    DemosaicArgs, EvaluateArgs, ModelFlags, ParamsArgs, SeiArgs, SeiCurveArgs, SimulateArgs, SynthArgs, TrainArgs,
};

/// Present in a run directory until training finishes cleanly.
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "cube".into())
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "-".into())
}

// synth ---------------------------------------------------------------------

pub fn synth(a: SynthArgs) -> Result<()> {
    ensure!(a.count > 0 && a.val <= a.count, "need 0 ≤ val ≤ count and count > 0");
    ensure!(a.source_bands >= 2, "need at least two source bands");
    let (lo, hi) = (a.range[0], a.range[1]);
    ensure!(hi > lo, "empty wavelength range {lo}..{hi}");
    std::fs::create_dir_all(&a.out)?;
    let wavelengths: Vec<f64> =
        (0..a.source_bands).map(|k| lo + (hi - lo) * k as f64 / (a.source_bands - 1) as f64).collect();
    let params = SceneParams { complexity: a.complexity, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut manifest = DatasetManifest::default();
    for i in 0..a.count {
        let cube = generate_scene(&mut rng, a.height, a.width, a.source_bands, &params);
        let name = format!("scene_{i:03}.cube");
        let file = CubeFile { cube: cube.cast(), wavelengths: Some(wavelengths.clone()), scale: None };
        save_cube(&a.out.join(&name), &file)?;
        let split = if i < a.count - a.val { Split::Train } else { Split::Val };
        manifest.entries.push(ManifestEntry { split, path: PathBuf::from(name) });
    }
    write_text(&a.out.join("manifest.txt"), &manifest.to_text())?;
    println!("wrote {} scenes ({}×{}×{}) to {}", a.count, a.height, a.width, a.source_bands, a.out.display());
    Ok(())
}

// simulate ------------------------------------------------------------------

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let pattern = parse_pattern(&a.pattern)?;
    let mut inputs: Vec<(Split, PathBuf)> = Vec::new();
    if let Some(m) = &a.manifest {
        let m = DatasetManifest::load(m).with_context(|| format!("loading manifest {}", m.display()))?;
        inputs.extend(m.entries.into_iter().map(|e| (e.split, e.path)));
    }
    inputs.extend(a.inputs.iter().map(|p| (Split::Train, p.clone())));
    ensure!(!inputs.is_empty(), "no input cubes (pass paths or --manifest)");

    let (gt_dir, mosaic_dir) = (a.out.join("gt"), a.out.join("mosaic"));
    std::fs::create_dir_all(&gt_dir)?;
    std::fs::create_dir_all(&mosaic_dir)?;
    pattern.save(&a.out.join("pattern.toml"))?;
    let mut manifest = DatasetManifest::default();
    for (split, path) in &inputs {
        let src = load_cube(path).with_context(|| format!("loading {}", path.display()))?;
        let (cube, centers) = match &src.wavelengths {
            Some(wl) => {
                let bank = make_ssf_bank(wl, pattern.bands(), (a.range[0], a.range[1]), a.fwhm)
                    .with_context(|| format!("building filter bank for {}", path.display()))?;
                (spectral_resample(&src.cube, &bank)?, Some(bank.centers))
            }
            None if src.cube.bands() == pattern.bands() => (src.cube.clone(), None),
            None => bail!(
                "{}: {} bands without a wavelength list cannot be resampled to {} bands",
                path.display(),
                src.cube.bands(),
                pattern.bands()
            ),
        };
        let (h, w) = pattern.snap_down(cube.height(), cube.width());
        ensure!(h > 0 && w > 0, "{}: smaller than one period", path.display());
        let (gt, scale) = normalize_max(&cube.crop(0, 0, h, w)?);
        let mosaic = mosaic_sample(&gt, &pattern)?;
        let name = stem(path);
        let gt_path = gt_dir.join(format!("{name}.cube"));
        let mosaic_path = mosaic_dir.join(format!("{name}.cube"));
        let scale = Some(scale * src.scale.unwrap_or(1.0));
        save_cube(&gt_path, &CubeFile { cube: gt, wavelengths: centers, scale })?;
        save_cube(&mosaic_path, &CubeFile { cube: Cube::from_planes(&[mosaic.clone()])?, wavelengths: None, scale })?;
        if a.png {
            save_mosaic_png(&mosaic, &mosaic_dir.join(format!("{name}.png")))?;
        }
        // The files on disk must describe the same measurement.
        let reread = load_cube(&gt_path)?.cube;
        ensure!(mosaic_sample(&reread, &pattern)? == mosaic, "{}: mosaic does not match its ground truth", name);

        let rel = |dir: &str| PathBuf::from(dir).join(format!("{name}.cube"));
        let entry = match split {
            Split::Train => rel("mosaic"),
            Split::Val | Split::Test => rel("gt"),
        };
        manifest.entries.push(ManifestEntry { split: *split, path: entry });
        log::info!("{}: {}×{} with {} bands", name, h, w, pattern.bands());
    }
    write_text(&a.out.join("manifest.txt"), &manifest.to_text())?;
    println!("simulated {} mosaics with a {}×{} pattern in {}", inputs.len(), pattern.r1(), pattern.r2(), a.out.display());
    Ok(())
}

// shared model flags ----------------------------------------------------------

fn run_config(flags: &ModelFlags) -> Result<RunConfig> {
    let mut cfg = match &flags.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &flags.pattern {
        cfg.pattern = Some(parse_pattern(p)?);
    }
    if let Some(a) = flags.attention {
        cfg.model.attention = a.into();
    }
    if flags.no_interp_branch {
        cfg.model.interp_branch = false;
    }
    if let Some(c) = flags.channels {
        cfg.model.channels = c;
    }
    if let Some(k) = flags.blocks {
        cfg.model.blocks = k;
    }
    if let Some(d) = flags.reduction {
        cfg.model.reduction = d;
    }
    Ok(cfg)
}

// train ---------------------------------------------------------------------

#[derive(Serialize)]
struct TrainSummary<'a> {
    epochs: usize,
    steps: usize,
    stopped_early: bool,
    best_epoch: usize,
    best: Option<&'a HistoryRow>,
    last: Option<&'a HistoryRow>,
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = run_config(&a.model)?;
    if let Some(s) = a.seed {
        cfg.train.seed = s;
    }
    if let Some(m) = a.sei_max {
        cfg.train.sei_max = Some(m);
    }
    if let Some(p) = a.transform_policy {
        cfg.train.policy = p.into();
    }
    if a.supervised {
        cfg.train.objective = Objective::Supervised;
    }
    if let Some(e) = a.epochs {
        cfg.train.max_epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.train.learning_rate = lr;
    }
    if let Some(p) = a.patch_size {
        cfg.train.patch_size = p;
    }
    if let Some(e) = a.eval_every {
        cfg.train.eval_every = e;
    }
    if let Some(d) = a.data {
        cfg.data.manifest = Some(d);
    }
    if let Some(o) = a.out {
        cfg.out = Some(o);
    }
    let pattern = cfg.resolve()?;
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let dir = cfg.run_dir(&format!("train-s{}-{stamp}", cfg.train.seed));
    cfg.out = Some(dir.clone());

    let (train_files, mut val_files) = split_files(cfg.data.manifest.as_deref(), &cfg.data.train, &cfg.data.val)?;
    ensure!(!train_files.is_empty(), "no training data (use --data or the [data] section)");
    let supervised = cfg.train.objective == Objective::Supervised;
    let train = training_samples(&train_files, &pattern, supervised)?;
    if val_files.is_empty() {
        log::warn!("no validation split; SEI is computed on the training images");
        val_files = train_files.clone();
    }
    let val = validation_samples(&val_files, &pattern)?;

    if dir.join("history.csv").exists() {
        bail!("{} already holds a run", dir.display());
    }
    let run = RunDir::create(&dir)?;
    write_text(&dir.join("config.toml"), &cfg.to_toml()?)?;
    let marker = dir.join(INCOMPLETE_MARKER);
    write_text(&marker, "training has not finished\n")?;
    log::info!("run directory {}", dir.display());

    let model = init_model::<f32>(cfg.model.clone(), cfg.train.seed)?;
    let out = match fit(model, &pattern, &train, &val, &cfg.train, Some(&run)) {
        Ok(o) => o,
        Err(e) => {
            write_text(&marker, &format!("training failed: {e}\n"))?;
            return Err(e.into());
        }
    };
    let rows: Vec<&HistoryRow> = out.evaluations().collect();
    let summary = TrainSummary {
        epochs: out.epochs,
        steps: out.steps,
        stopped_early: out.stopped_early,
        best_epoch: out.best_epoch,
        best: rows.iter().copied().find(|r| r.epoch == out.best_epoch),
        last: rows.last().copied(),
    };
    write_text(&dir.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    std::fs::remove_file(&marker)?;

    println!("run: {}", dir.display());
    println!("epochs {} steps {} stopped_early {}", out.epochs, out.steps, out.stopped_early);
    for (label, row) in [("best", summary.best), ("last", summary.last)] {
        if let Some(r) = row {
            println!(
                "{label:4} epoch {:5}  sei {:.3e}  psnr {}  ssim {}",
                r.epoch,
                r.sei.unwrap_or(f64::NAN),
                fmt_opt(r.psnr, 2),
                fmt_opt(r.ssim, 4)
            );
        }
    }
    Ok(())
}

// demosaic ------------------------------------------------------------------

fn load_checkpoint(path: &Path) -> Result<Checkpoint<f32>> {
    Checkpoint::<f32>::load(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

pub fn demosaic(a: DemosaicArgs) -> Result<()> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let loaded = load_input(&a.input, &ckpt.pattern)?;
    let cube = ckpt.model.forward(&loaded.mosaic(&ckpt.pattern)?, &ckpt.pattern)?;
    let (b, h, w) = cube.dims();
    let wavelengths = load_cube(&a.input)?.wavelengths.filter(|wl| wl.len() == b);
    save_cube(&a.out, &CubeFile { cube, wavelengths, scale: None })?;
    println!("wrote {}×{}×{} cube to {}", h, w, b, a.out.display());
    Ok(())
}

// evaluate ------------------------------------------------------------------

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    let est = load_cube(&a.estimate).with_context(|| format!("loading {}", a.estimate.display()))?.cube;
    let reference = load_cube(&a.reference).with_context(|| format!("loading {}", a.reference.display()))?.cube;
    let opts = MetricOptions { ergas_ratio: a.ergas_ratio, ..Default::default() };
    let r = evaluate_metrics(&est, &reference, &opts)?;
    println!("psnr           {:.4}", r.psnr);
    println!("psnr_band_mean {:.4}", r.psnr_band_mean);
    println!("ssim           {:.6}", r.ssim);
    println!("sam            {}", fmt_opt(r.sam, 6));
    println!("ergas          {}", fmt_opt(r.ergas, 6));
    if let Some(path) = &a.csv {
        let mut text = String::from("band,psnr,ssim\n");
        for (b, (p, s)) in r.per_band_psnr.iter().zip(&r.per_band_ssim).enumerate() {
            writeln!(text, "{b},{p},{s}")?;
        }
        writeln!(text, "all,{},{}", r.psnr, r.ssim)?;
        write_text(path, &text)?;
    }
    Ok(())
}

// sei -----------------------------------------------------------------------

pub fn sei(a: SeiArgs) -> Result<()> {
    let ckpt = a.checkpoint.as_deref().map(load_checkpoint).transpose()?;
    let pattern: SfaPattern = match (&ckpt, &a.pattern) {
        (Some(c), _) => c.pattern.clone(),
        (None, Some(p)) => parse_pattern(p)?,
        (None, None) => bail!("pass --pattern or --checkpoint"),
    };
    let (_, val) = split_files(a.data.as_deref(), &[], &a.inputs)?;
    ensure!(!val.is_empty(), "nothing to score");
    let mut text = String::from("file,sei\n");
    let mut total = 0.0;
    for path in &val {
        let loaded = load_input(path, &pattern)?;
        let cube: Cube<f32> = match (&ckpt, loaded.cube()) {
            (Some(c), _) => c.model.forward(&loaded.mosaic(&pattern)?, &pattern)?,
            (None, Some(cube)) => cube.clone(),
            (None, None) => bail!("{} is a mosaic; pass --checkpoint to score a model's output", path.display()),
        };
        let s = cube_sei(&cube, &pattern).sei;
        total += s;
        println!("{:.6e}  {}", s, path.display());
        writeln!(text, "{},{s}", path.display())?;
    }
    println!("{:.6e}  mean over {} files", total / val.len() as f64, val.len());
    if let Some(path) = &a.csv {
        write_text(path, &text)?;
    }
    Ok(())
}

pub fn sei_curve(a: SeiCurveArgs) -> Result<()> {
    let history = a.run.join("history.csv");
    let rows = read_history(&history).with_context(|| format!("reading {}", history.display()))?;
    let evals: Vec<&HistoryRow> = rows.iter().filter(|r| r.sei.is_some()).collect();
    ensure!(!evals.is_empty(), "{} has no SEI evaluations", history.display());
    let limit = a.sei_max.unwrap_or(f64::INFINITY);
    let mut points: Vec<SeiPoint> = Vec::new();
    let mut stop_at = None;
    for r in &evals {
        points.push(SeiPoint { epoch: r.epoch, sei: r.sei.unwrap_or(f64::NAN) });
        if stop_at.is_none() && should_stop(&points, limit).stop {
            stop_at = Some(r.epoch);
        }
    }
    let best = should_stop(&points, limit).best.map(|i| points[i].epoch);
    let mut text = String::from("epoch,sei,psnr\n");
    println!("{:>7}  {:>11}  {:>8}", "epoch", "sei", "psnr");
    for (r, p) in evals.iter().zip(&points) {
        let mut flag = String::new();
        if Some(r.epoch) == best {
            flag.push_str("  <- lowest SEI");
        }
        if Some(r.epoch) == stop_at {
            flag.push_str("  <- exceeds sei-max");
        }
        println!("{:>7}  {:>11.4e}  {:>8}{flag}", r.epoch, p.sei, fmt_opt(r.psnr, 3));
        writeln!(text, "{},{},{}", r.epoch, p.sei, r.psnr.map(|v| v.to_string()).unwrap_or_default())?;
    }
    match stop_at {
        Some(e) => println!("a limit of {limit:e} stops the run at epoch {e}"),
        None if a.sei_max.is_some() => println!("the SEI never exceeds {limit:e}"),
        None => {}
    }
    if let Some(path) = &a.csv {
        write_text(path, &text)?;
    }
    Ok(())
}

// params --------------------------------------------------------------------

pub fn params(a: ParamsArgs) -> Result<()> {
    let mut cfg = run_config(&a.model)?;
    cfg.resolve()?;
    let m = &cfg.model;
    let model = Model::<f32>::zeroed(m.clone())?;
    let table = count_params(&model);
    println!(
        "model: {} bands, {}×{} pattern, C={} K={} d={} attention={:?} interp_branch={}",
        m.bands, m.r1, m.r2, m.channels, m.blocks, m.reduction, m.attention, m.interp_branch
    );
    let rows = if a.verbose {
        table.rows.iter().map(|r| (r.name.clone(), r.count)).collect()
    } else {
        table.by_layer()
    };
    for (name, count) in rows {
        println!("  {name:<40} {count:>10}");
    }
    println!("  {:<40} {:>10}", "total", table.total);
    println!("  {:<40} {:>10}", "MACs per 100×100 mosaic", model.forward_macs(100, 100));

    let (c, r1, r2, d) = (m.channels, m.r1, m.r2, m.reduction);
    let lsa = lsa_param_count(c, r1, r2, d, false);
    let hsa = hsa_param_count(c, r1, r2, d, false);
    println!("attention site (C={c}, {r1}×{r2}, d={d}), weights only:");
    println!("  LSA realized {lsa:>12}   formula 2(r1²r2² + C²)/d = {}", lsa_weight_formula(c, r1, r2, d));
    println!("  HSA realized {hsa:>12}   formula 2r1²r2²C²/d      = {}", hsa_weight_formula(c, r1, r2, d));
    println!(
        "  with biases: LSA {}, HSA {}",
        lsa_param_count(c, r1, r2, d, true),
        hsa_param_count(c, r1, r2, d, true)
    );
    let ratio = lsa as f64 / hsa as f64;
    println!("  LSA/HSA = {ratio:.5}  (≈{:.1}% reduction)", 100.0 * (1.0 - ratio));
    Ok(())
}

