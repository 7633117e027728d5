//! Atomic CSV and JSON writers.
//!
//! Files are written to a temporary sibling and renamed into place, so a
//! reader never sees a partial file. Without a path the document goes to
//! standard output.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::provenance::Provenance;

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Writes to `path`, or to standard output when `None`.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Provenance comment lines followed by a CSV table of `rows`.
pub fn csv_document<R: Serialize>(prov: &Provenance, rows: &[R]) -> Result<Vec<u8>> {
    let mut buf = prov.csv_header().into_bytes();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    provenance: &'a Provenance,
    result: &'a T,
}

/// `{"provenance": …, "result": …}`, indented and newline-terminated.
pub fn json_document<T: Serialize>(prov: &Provenance, result: &T) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(&Document { provenance: prov, result })?;
    buf.push(b'\n');
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Command, ExperimentConfig};
    use crate::provenance::tolerances;

    #[derive(Serialize)]
    struct Row {
        t: f64,
        f: f64,
    }

    #[test]
    fn csv_has_header_row_and_lf_endings() {
        let p = Provenance::new(Command::Density, &ExperimentConfig::default(), tolerances([]));
        let bytes = csv_document(&p, &[Row { t: 0.5, f: 1.25 }, Row { t: 1.0, f: 2.0 }]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(!text.contains('\r'));
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body, ["t,f", "0.5,1.25", "1.0,2.0"]);
    }

    #[test]
    fn atomic_write_replaces_the_target() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn json_starts_with_provenance() {
        let p = Provenance::new(Command::Constants, &ExperimentConfig::default(), tolerances([]));
        let text = String::from_utf8(json_document(&p, &vec![1, 2]).unwrap()).unwrap();
        let first_key = text.lines().nth(1).unwrap().trim();
        assert!(first_key.starts_with("\"provenance\""));
    }
}
