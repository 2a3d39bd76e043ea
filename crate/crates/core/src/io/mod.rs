//! CSV ingestion and export, model documents, and synthetic samples.

mod model_doc;
mod sample;
mod table;

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub use model_doc::{load_model, save_model, ConfigEcho, ModelDocument, TraceSummary, MODEL_FORMAT};
pub use sample::{sample_mixture, Sample};
pub use table::{
    format_real, load_csv, read_csv, write_plan, write_samples, write_sweep, write_trace, ColumnRef, CsvOptions,
};

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn atomic_write_reports_missing_directory() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("out.txt");
        assert!(matches!(write_atomic(&path, b"x"), Err(Error::Io { .. })));
    }
}
