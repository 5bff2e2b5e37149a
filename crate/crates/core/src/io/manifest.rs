use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split tag {other}"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub split: Split,
    pub path: PathBuf,
}

/// Text listing of cube paths, one `<split> <path>` pair per line.
/// Blank lines and `#` comments are ignored; relative paths resolve
/// against the manifest's directory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (tag, path) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| Error::Config(format!("manifest line {}: expected `<split> <path>`", n + 1)))?;
            let path = PathBuf::from(path.trim());
            let path = if path.is_relative() { base.join(path) } else { path };
            entries.push(ManifestEntry { split: tag.parse()?, path });
        }
        Ok(DatasetManifest { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn paths(&self, split: Split) -> impl Iterator<Item = &Path> {
        self.entries.iter().filter(move |e| e.split == split).map(|e| e.path.as_path())
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|e| format!("{} {}\n", e.split, e.path.display())).collect()
    }
}
