//! Data pipeline, model files, experiment harness and command-line front end
//! for `metatree-core`.

pub mod config;
pub mod data;
pub mod experiments;
pub mod manifest;
pub mod model;
pub mod model_io;

use serde::Serialize;
use std::path::Path;

/// Writes `rows` as CSV with a header derived from the row type.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), csv::Error> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
