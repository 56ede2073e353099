use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::CentroidModel;
use crate::error::{Error, Result};
use crate::types::{Segment, Segmentation};

use super::write_atomic;

pub const SEGMENTATION_SCHEMA_VERSION: u32 = 1;

/// On-disk segmentation with the parameters that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationFile {
    pub schema_version: u32,
    /// Positive classes `M` of the catalog the labels refer to.
    pub num_classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub total_frames: usize,
    pub segments: Vec<Segment>,
}

impl SegmentationFile {
    pub fn new(seg: &Segmentation, num_classes: usize) -> Self {
        Self {
            schema_version: SEGMENTATION_SCHEMA_VERSION,
            num_classes,
            k: None,
            epsilon: None,
            total_frames: seg.total_frames(),
            segments: seg.segments().to_vec(),
        }
    }

    pub fn segmentation(&self) -> Result<Segmentation> {
        let seg = Segmentation::new(self.segments.clone(), self.total_frames)?;
        if let Some(s) = seg.segments().iter().find(|s| s.class_id > self.num_classes) {
            return Err(Error::ClassOutOfRange {
                frame: s.start,
                class_id: s.class_id,
                max: self.num_classes,
            });
        }
        Ok(seg)
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub(crate) fn from_json<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn render_segmentation(file: &SegmentationFile) -> String {
    to_json(file)
}

pub fn write_segmentation(path: &Path, file: &SegmentationFile) -> Result<()> {
    write_atomic(path, render_segmentation(file).as_bytes())
}

/// Reads and validates a segmentation file.
pub fn read_segmentation(path: &Path) -> Result<(SegmentationFile, Segmentation)> {
    let text = std::fs::read_to_string(path)?;
    let file: SegmentationFile = from_json(path, &text)?;
    if file.schema_version != SEGMENTATION_SCHEMA_VERSION {
        return Err(Error::param(format!(
            "{}: unsupported schema_version {}",
            path.display(),
            file.schema_version
        )));
    }
    let seg = file.segmentation()?;
    Ok((file, seg))
}

pub fn write_model(path: &Path, model: &CentroidModel) -> Result<()> {
    write_atomic(path, to_json(model).as_bytes())
}

pub fn read_model(path: &Path) -> Result<CentroidModel> {
    let text = std::fs::read_to_string(path)?;
    let model: CentroidModel = from_json(path, &text)?;
    model.validate()?;
    Ok(model)
}
