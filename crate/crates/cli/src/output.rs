//! All-or-nothing output: every file of a command is rendered in memory and
//! written through temporary siblings that are renamed only once all writes
//! succeeded.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// CSV schema version, written into every header comment.
pub const SCHEMA_VERSION: u32 = 1;

pub fn header(kind: &str, extra: &str) -> String {
    let mut s = format!("# levsqueeze {kind} schema v{SCHEMA_VERSION}");
    if !extra.is_empty() {
        s.push_str("; ");
        s.push_str(extra);
    }
    s.push('\n');
    s
}

/// `run.csv` with tag `summary` becomes `run.summary.csv`.
pub fn sibling(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    path.with_file_name(format!("{stem}.{tag}.{ext}"))
}

fn tmp_path(p: &Path) -> PathBuf {
    let mut name = p.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    p.with_file_name(name)
}

pub fn write_all(files: &[(PathBuf, String)]) -> CliResult<()> {
    let mut staged = Vec::with_capacity(files.len());
    let result = (|| {
        for (path, text) in files {
            let tmp = tmp_path(path);
            staged.push(tmp.clone());
            let io = |source| CliError::Io { path: path.clone(), source };
            let mut f = fs::File::create(&tmp).map_err(io)?;
            f.write_all(text.as_bytes()).map_err(io)?;
            f.sync_all().map_err(io)?;
        }
        for (path, _) in files {
            fs::rename(tmp_path(path), path).map_err(|source| CliError::Io { path: path.clone(), source })?;
        }
        Ok(())
    })();
    if result.is_err() {
        for t in staged {
            let _ = fs::remove_file(t);
        }
    }
    result
}
