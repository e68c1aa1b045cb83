//! Artifacts are written under a `.partial` name and renamed into place,
//! so an interrupted or failed run never leaves a complete-looking file.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

fn partial(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}

/// Produces `path` through `write`, which receives the temporary path.
pub fn commit<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&Path) -> Result<()>,
{
    let tmp = partial(path);
    match write(&tmp) {
        Ok(()) => std::fs::rename(&tmp, path).with_context(|| format!("cannot move {} into place", path.display())),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}

pub fn text(path: &Path, body: &str) -> Result<()> {
    commit(path, |tmp| {
        let mut w = BufWriter::new(File::create(tmp).with_context(|| format!("cannot create {}", tmp.display()))?);
        w.write_all(body.as_bytes())?;
        w.flush()?;
        Ok(())
    })
}

pub fn json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    text(path, &body)
}

/// CSV with a header row and one row per record.
pub fn csv_rows<S: AsRef<str>>(path: &Path, header: &[S], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    commit(path, |tmp| {
        let mut w = csv::Writer::from_path(tmp).with_context(|| format!("cannot create {}", tmp.display()))?;
        w.write_record(header.iter().map(|h| h.as_ref()))?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    })
}
