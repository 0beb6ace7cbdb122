//! Output files: every file opens with the tool version, the manifest hash
//! and its column names.

use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub fn tool_line() -> String {
    format!("# skewlab {}", env!("CARGO_PKG_VERSION"))
}

pub struct OutDir {
    dir: PathBuf,
    hash: String,
}

impl OutDir {
    pub fn create(dir: &Path, hash: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash: hash.to_string(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn header_lines(&self) -> Vec<String> {
        vec![tool_line(), format!("# manifest sha256={}", self.hash)]
    }

    pub fn csv(&self, name: &str, columns: &[&str]) -> Result<Csv, CliError> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| io_error(&path, e))?;
        let mut csv = Csv {
            out: BufWriter::new(file),
            path,
            width: columns.len(),
        };
        let joined = columns.join(",");
        for line in self.header_lines() {
            csv.line(&line)?;
        }
        csv.line(&format!("# columns: {joined}"))?;
        csv.line(&joined)?;
        Ok(csv)
    }

    /// `key = value` report with the same comment header as the CSV files.
    pub fn report(&self, name: &str, entries: &[(String, String)]) -> Result<(), CliError> {
        let path = self.path(name);
        let mut text = self.header_lines().join("\n");
        text.push_str("\n# columns: key,value\n");
        for (k, v) in entries {
            text.push_str(&format!("{k} = {v}\n"));
        }
        write_file(&path, text.as_bytes())
    }

    pub fn raw(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_file(&self.path(name), bytes)
    }
}

pub fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| io_error(path, e))
}

pub struct Csv {
    out: BufWriter<File>,
    path: PathBuf,
    width: usize,
}

impl Csv {
    fn line(&mut self, s: &str) -> Result<(), CliError> {
        writeln!(self.out, "{s}").map_err(|e| io_error(&self.path, e))
    }

    pub fn row(&mut self, cells: &[&dyn Display]) -> Result<(), CliError> {
        debug_assert_eq!(cells.len(), self.width);
        let joined = cells
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",");
        self.line(&joined)
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out.flush().map_err(|e| io_error(&self.path, e))
    }
}

/// Float with a round-trip representation: plain decimal in `[1e-4, 1e16)`,
/// scientific notation outside.
#[derive(Debug, Clone, Copy)]
pub struct G(pub f64);

impl Display for G {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a = self.0.abs();
        if a == 0.0 || !a.is_finite() || (1e-4..1e16).contains(&a) {
            write!(f, "{}", self.0)
        } else {
            write!(f, "{:e}", self.0)
        }
    }
}

/// `key = value` pair with the value's `Display` form.
pub fn kv(key: &str, value: impl Display) -> (String, String) {
    (key.to_string(), value.to_string())
}
