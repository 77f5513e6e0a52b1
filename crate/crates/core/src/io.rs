//! Shared I/O plumbing: cache directory resolution and small CSV writers
//! used by both the test suite and the command-line tool.

use crate::Result;
use std::path::{Path, PathBuf};

/// Directory for expensive precomputed operators (wall matrices, pair
/// tables). Defaults to `<workspace root>/cache`; override with the
/// `SUSP_CACHE_DIR` environment variable.
pub fn default_cache_dir() -> PathBuf {
    if let Ok(dir) = std::env::var("SUSP_CACHE_DIR") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cache")
}

/// Create the directory (and parents) if missing, returning the path.
pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

/// Write rows of f64 cells under a header line to a CSV file.
///
/// Floats are written with `{:.17e}` so a round trip through the file
/// reproduces the exact binary values.
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    use std::io::Write;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{header}")?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_exact_values() {
        let dir = std::env::temp_dir().join("susp-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.csv");
        let rows = vec![vec![1.0 / 3.0, -2.5e-17], vec![std::f64::consts::PI, 0.0]];
        write_csv(&path, "a,b", &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "a,b");
        for (line, row) in lines.zip(&rows) {
            for (cell, v) in line.split(',').zip(row) {
                assert_eq!(cell.parse::<f64>().unwrap().to_bits(), v.to_bits());
            }
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
