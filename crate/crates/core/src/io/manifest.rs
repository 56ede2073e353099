use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ClassCatalog;

use super::json::from_json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// One recorded sequence. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub name: String,
    pub frames: usize,
    #[serde(default = "one")]
    pub frame_rate: f64,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posteriors: Option<PathBuf>,
    /// Directory of `.ppm` frames, taken in file-name order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames_dir: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}

/// Class catalog plus the list of sequences, loaded from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub catalog: ClassCatalog,
    pub sequences: Vec<SequenceEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    /// Loads the manifest and resolves and checks every referenced path.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut manifest: Manifest = from_json(path, &text)?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        manifest.validate()?;
        Ok(manifest)
    }

    fn validate(&mut self) -> Result<()> {
        let mut names = BTreeSet::new();
        for seq in &mut self.sequences {
            if !names.insert(seq.name.clone()) {
                return Err(Error::param(format!("duplicate sequence name {:?}", seq.name)));
            }
            if !(seq.frame_rate > 0.0 && seq.frame_rate.is_finite()) {
                return Err(Error::param(format!(
                    "sequence {:?}: frame_rate must be positive",
                    seq.name
                )));
            }
            for p in [&mut seq.labels, &mut seq.posteriors, &mut seq.frames_dir]
                .into_iter()
                .flatten()
            {
                if p.is_relative() {
                    *p = self.base_dir.join(&*p);
                }
                if !p.exists() {
                    return Err(Error::param(format!(
                        "sequence {:?}: {} does not exist",
                        seq.name,
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &SequenceEntry> + '_ {
        self.sequences.iter().filter(move |s| s.split == split)
    }
}

/// `.ppm` files of a directory in file-name order.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut frames: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm")))
        .collect();
    frames.sort();
    Ok(frames)
}

impl SequenceEntry {
    pub fn frame_paths(&self) -> Result<Vec<PathBuf>> {
        let dir = self
            .frames_dir
            .as_ref()
            .ok_or_else(|| Error::param(format!("sequence {:?} has no frames_dir", self.name)))?;
        list_frames(dir)
    }
}
