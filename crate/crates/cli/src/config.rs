//! Run configuration: one TOML file that fully describes a training run.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use usd_core::nn::ModelConfig;
use usd_core::sfa::SfaPattern;
use usd_core::train::TrainConfig;

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "USD_OUT_DIR";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Manifest with `train`/`val`/`test` tagged cube paths.
    pub manifest: Option<PathBuf>,
    /// Extra training files, in addition to the manifest.
    pub train: Vec<PathBuf>,
    /// Extra validation files, in addition to the manifest.
    pub val: Vec<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Defaults to the row-major pattern matching `model.r1 × model.r2`.
    pub pattern: Option<SfaPattern>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    /// Run directory; see [`RunConfig::run_dir`] for the fallback.
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            pattern: None,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            data: DataConfig::default(),
            out: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // Relative data paths are relative to the config file.
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.data.manifest.iter_mut().for_each(rebase);
        cfg.data.train.iter_mut().for_each(rebase);
        cfg.data.val.iter_mut().for_each(rebase);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Makes pattern and model agree, filling whichever is missing.
    pub fn resolve(&mut self) -> Result<SfaPattern> {
        let pattern = self.pattern.clone().unwrap_or_else(|| SfaPattern::row_major(self.model.r1, self.model.r2));
        self.model.bands = pattern.bands();
        self.model.r1 = pattern.r1();
        self.model.r2 = pattern.r2();
        self.model.validate()?;
        self.train.validate()?;
        self.pattern = Some(pattern.clone());
        Ok(pattern)
    }

    /// `out`, else `$USD_OUT_DIR/<name>`, else `runs/<name>`.
    pub fn run_dir(&self, name: &str) -> PathBuf {
        match &self.out {
            Some(p) => p.clone(),
            None => output_root().join(name),
        }
    }
}

pub fn output_root() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

/// `RxC` for a row-major non-redundant pattern, otherwise a pattern TOML file.
pub fn parse_pattern(arg: &str) -> Result<SfaPattern> {
    if let Some((a, b)) = arg.split_once(['x', 'X']) {
        if let (Ok(r1), Ok(r2)) = (a.trim().parse::<usize>(), b.trim().parse::<usize>()) {
            if r1 == 0 || r2 == 0 {
                bail!("pattern period must be positive, got {arg}");
            }
            return Ok(SfaPattern::row_major(r1, r2));
        }
    }
    SfaPattern::load(Path::new(arg)).with_context(|| format!("loading pattern {arg}"))
}
