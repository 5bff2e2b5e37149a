use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use usd_core::io::load_cube;
use usd_core::sfa::{mosaic_sample, SfaPattern};

fn usd(args: &[&str]) -> Output {
    usd_env(args, &[])
}

fn usd_env(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_usd"));
    cmd.args(args).env("RUST_LOG", "warn").env_remove("USD_OUT_DIR");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small synthetic set simulated through a 4×4 pattern.
fn dataset(root: &Path) -> PathBuf {
    let scenes = root.join("scenes");
    let sim = root.join("sim");
    ok(usd(&["synth", "--out", s(&scenes), "--count", "3", "--val", "1", "--height", "34", "--width", "32", "--seed", "5"]));
    ok(usd(&["simulate", "--manifest", s(&scenes.join("manifest.txt")), "--pattern", "4x4", "--out", s(&sim), "--png"]));
    sim
}

fn tiny_train(data: &Path, out: &Path, extra: &[&str]) -> String {
    let mut args = vec![
        "train", "--data", s(data), "--out", s(out), "--pattern", "4x4", "--channels", "4", "--blocks", "1", "--reduction", "2",
        "--epochs", "4", "--eval-every", "2", "--patch-size", "16", "--lr", "1e-3", "--seed", "3",
    ];
    args.extend_from_slice(extra);
    ok(usd(&args))
}

#[test]
fn params_reports_the_reduction() {
    let out = ok(usd(&["params"]));
    assert!(out.contains("LSA realized         2398"), "{out}");
    assert!(out.contains("HSA realized      1280000"), "{out}");
    assert!(out.contains("2360.5"), "{out}");
    assert!(out.contains("≈99.8% reduction"), "{out}");

    let small = ok(usd(&["params", "--pattern", "2x2", "--channels", "8", "--reduction", "2", "--attention", "hsa"]));
    assert!(small.contains("LSA realized           80"), "{small}");
    assert!(small.contains("attention=Hsa"), "{small}");
}

#[test]
fn simulate_emits_consistent_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dataset(dir.path());
    let pattern = SfaPattern::load(&sim.join("pattern.toml")).unwrap();
    let manifest = std::fs::read_to_string(sim.join("manifest.txt")).unwrap();
    assert_eq!(manifest.lines().filter(|l| l.starts_with("train mosaic/")).count(), 2);
    assert_eq!(manifest.lines().filter(|l| l.starts_with("val gt/")).count(), 1);
    for i in 0..3 {
        let gt = load_cube(&sim.join(format!("gt/scene_{i:03}.cube"))).unwrap();
        let mosaic = load_cube(&sim.join(format!("mosaic/scene_{i:03}.cube"))).unwrap();
        assert_eq!(gt.cube.dims(), (16, 32, 32), "height snapped to whole periods");
        assert_eq!(gt.wavelengths.as_ref().unwrap().len(), 16);
        assert!(gt.cube.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(mosaic_sample(&gt.cube, &pattern).unwrap(), mosaic.cube.band_plane(0));
        assert!(sim.join(format!("mosaic/scene_{i:03}.png")).exists());
    }
}

#[test]
fn synth_and_simulate_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (sa, sb) = (dataset(a.path()), dataset(b.path()));
    for f in ["gt/scene_000.cube", "mosaic/scene_001.cube", "manifest.txt"] {
        assert_eq!(std::fs::read(sa.join(f)).unwrap(), std::fs::read(sb.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn train_writes_a_reproducible_run() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dataset(dir.path());
    let manifest = sim.join("manifest.txt");
    let before = std::fs::read(sim.join("mosaic/scene_000.cube")).unwrap();

    let run = dir.path().join("run");
    let out = tiny_train(&manifest, &run, &["--transform-policy", "shift"]);
    assert!(out.contains("epochs 4"), "{out}");
    for f in ["config.toml", "history.csv", "best.ckpt", "last.ckpt", "summary.json"] {
        assert!(run.join(f).exists(), "{f} missing");
    }
    assert!(!run.join("INCOMPLETE").exists());
    assert_eq!(std::fs::read(sim.join("mosaic/scene_000.cube")).unwrap(), before, "inputs untouched");

    let snapshot = std::fs::read_to_string(run.join("config.toml")).unwrap();
    assert!(snapshot.contains("policy = \"shift\""), "{snapshot}");
    let again = dir.path().join("again");
    ok(usd(&["train", "--config", s(&run.join("config.toml")), "--out", s(&again)]));
    assert_eq!(
        std::fs::read_to_string(run.join("history.csv")).unwrap(),
        std::fs::read_to_string(again.join("history.csv")).unwrap()
    );
    assert_eq!(std::fs::read(run.join("last.ckpt")).unwrap(), std::fs::read(again.join("last.ckpt")).unwrap());

    let refuse = usd(&["train", "--config", s(&run.join("config.toml")), "--out", s(&run)]);
    assert!(!refuse.status.success());
}

#[test]
fn demosaic_evaluate_and_sei() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dataset(dir.path());
    let run = dir.path().join("run");
    tiny_train(&sim.join("manifest.txt"), &run, &[]);
    let ckpt = run.join("best.ckpt");
    let gt = sim.join("gt/scene_002.cube");

    let est = dir.path().join("est.cube");
    ok(usd(&["demosaic", "--checkpoint", s(&ckpt), s(&sim.join("mosaic/scene_000.cube")), "--out", s(&est)]));
    assert_eq!(load_cube(&est).unwrap().cube.dims(), (16, 32, 32));

    let same = ok(usd(&["evaluate", s(&gt), s(&gt), "--csv", s(&dir.path().join("m.csv"))]));
    assert!(same.contains("psnr           inf"), "{same}");
    assert!(same.contains("ssim           1.000000"), "{same}");
    assert!(same.contains("sam            0.000000"), "{same}");
    assert!(same.contains("ergas          0.000000"), "{same}");
    let csv = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 16 + 1);

    let from_cube = dir.path().join("from_cube.cube");
    ok(usd(&["demosaic", "--checkpoint", s(&ckpt), s(&gt), "--out", s(&from_cube)]));
    let metrics = ok(usd(&["evaluate", s(&from_cube), s(&gt)]));
    assert!(metrics.lines().next().unwrap().starts_with("psnr"), "{metrics}");

    let sei = ok(usd(&["sei", "--pattern", "4x4", s(&gt)]));
    assert!(sei.contains("mean over 1 files"), "{sei}");
    let model_sei = ok(usd(&["sei", "--checkpoint", s(&ckpt), "--data", s(&sim.join("manifest.txt"))]));
    assert!(model_sei.contains("mean over 1 files"), "{model_sei}");
    let mosaic_only = usd(&["sei", "--pattern", "4x4", s(&sim.join("mosaic/scene_000.cube"))]);
    assert!(!mosaic_only.status.success());

    let curve = ok(usd(&["sei-curve", s(&run), "--sei-max", "0", "--csv", s(&dir.path().join("curve.csv"))]));
    assert!(curve.contains("<- lowest SEI"), "{curve}");
    assert!(curve.contains("stops the run at epoch 0"), "{curve}");
}

#[test]
fn sei_max_stops_training() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dataset(dir.path());
    let run = dir.path().join("run");
    let out = tiny_train(&sim.join("manifest.txt"), &run, &["--sei-max", "0"]);
    assert!(out.contains("stopped_early true"), "{out}");
}

#[test]
fn ablation_flags_reach_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dataset(dir.path());
    let run = dir.path().join("run");
    tiny_train(&sim.join("manifest.txt"), &run, &["--no-interp-branch", "--attention", "none"]);
    let snapshot = std::fs::read_to_string(run.join("config.toml")).unwrap();
    assert!(snapshot.contains("interp_branch = false"), "{snapshot}");
    assert!(snapshot.contains("attention = \"none\""), "{snapshot}");
}

#[test]
fn supervised_training_needs_cubes() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dataset(dir.path());
    let mosaics = usd(&[
        "train", "--data", s(&sim.join("manifest.txt")), "--out", s(&dir.path().join("bad")), "--pattern", "4x4", "--supervised",
    ]);
    assert!(!mosaics.status.success());
    assert!(String::from_utf8_lossy(&mosaics.stderr).contains("supervised training needs a cube"));

    let cubes = sim.join("cubes.txt");
    std::fs::write(&cubes, "train gt/scene_000.cube\ntrain gt/scene_001.cube\nval gt/scene_002.cube\n").unwrap();
    let run = dir.path().join("run");
    tiny_train(&cubes, &run, &["--supervised"]);
    let snapshot = std::fs::read_to_string(run.join("config.toml")).unwrap();
    assert!(snapshot.contains("objective = \"supervised\""), "{snapshot}");
}

#[test]
fn default_output_root_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dataset(dir.path());
    let root = dir.path().join("root");
    let manifest = sim.join("manifest.txt");
    let args = [
        "train", "--data", s(&manifest), "--pattern", "4x4", "--channels", "4", "--blocks", "1", "--reduction",
        "2", "--epochs", "1", "--patch-size", "16",
    ];
    ok(usd_env(&args, &[("USD_OUT_DIR", &root)]));
    let runs: Vec<_> = std::fs::read_dir(&root).unwrap().collect();
    assert_eq!(runs.len(), 1);
}

#[test]
fn failures_exit_nonzero_with_one_line() {
    let out = usd(&["evaluate", "/nonexistent/a.cube", "/nonexistent/b.cube"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: loading /nonexistent/a.cube"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[train]\nlearning_rat = 1.0\n").unwrap();
    assert!(!usd(&["params", "--config", s(&bad)]).status.success());
}
