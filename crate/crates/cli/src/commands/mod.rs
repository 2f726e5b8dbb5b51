mod consistency;
mod eigen;
mod ratio_fit;
mod ridge;
mod train;

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

pub use consistency::cmd_consistency;
pub use eigen::cmd_eigen_report;
pub use ratio_fit::cmd_ratio_fit;
pub use ridge::{cmd_ridge_verify, RidgeArgs};
pub use train::cmd_train;

/// Whether the command's own checks passed; failures exit with code 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    CheckFailed,
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Render into an in-memory buffer with one of the core CSV writers.
pub(crate) fn csv_string(
    f: impl FnOnce(&mut Vec<u8>) -> fedshift::Result<()>,
) -> Result<String> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(String::from_utf8(buf)?)
}
