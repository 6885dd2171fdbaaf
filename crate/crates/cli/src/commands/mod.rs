pub mod data;
pub mod learn;
pub mod metrics;
pub mod observe;

use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// `path` with `suffix` appended to its file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

pub fn required<T>(value: Option<T>, what: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::Usage(format!("{what} is required (flag or config)")))
}
