//! File formats.
//!
//! Frame-indexed data is CSV; structured data (segmentations, models,
//! manifests, reports) is JSON. Floats are written in their shortest
//! round-trip decimal form, so reading a file back gives bit-identical values.
//! Every write goes to a temporary file in the target directory and is renamed
//! into place.

mod csv;
mod json;
mod manifest;
mod report;

use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub use self::csv::{
    parse_labels, parse_posteriors, read_labels, read_posteriors, render_labels, render_posteriors,
    write_labels, write_posteriors,
};
pub use self::json::{
    read_model, read_segmentation, render_segmentation, write_model, write_segmentation, SegmentationFile,
};
pub use self::manifest::{list_frames, Manifest, SequenceEntry, Split};
pub use self::report::{
    build_report, render_html, render_score_table, write_report, ClassRow, EvalReport, REPORT_SCHEMA_VERSION,
};

/// Writes `bytes` to `path` through a temporary sibling file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
