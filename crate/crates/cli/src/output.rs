use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use npcluster::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Output { .. } => "io",
            CliError::Core(e) => match e {
                Error::Io { .. } => "io",
                Error::Parse { .. } => "parse",
                Error::InvalidInput(_) => "invalid-input",
                Error::DimensionMismatch { .. } => "dimension-mismatch",
                Error::TooFew { .. } => "too-few",
                Error::ZeroVariance(_) => "zero-variance",
                Error::Degenerate(_) => "degenerate",
                Error::Undefined(_) => "undefined",
            },
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Output { .. } => 3,
            CliError::Core(e) if e.is_data_error() => 3,
            CliError::Core(_) => 4,
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Output directory; every file written through it lands in `dir`.
pub struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::Output { path: dir.to_path_buf(), message: e.to_string() })?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn fail(&self, name: &str, e: impl ToString) -> CliError {
        CliError::Output { path: self.path(name), message: e.to_string() }
    }

    /// Writes a delimited table with `header` and pre-formatted rows.
    pub fn table(&self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult {
        let mut w = csv::Writer::from_path(self.path(name)).map_err(|e| self.fail(name, e))?;
        w.write_record(header).map_err(|e| self.fail(name, e))?;
        for row in rows {
            w.write_record(&row).map_err(|e| self.fail(name, e))?;
        }
        w.flush().map_err(|e| self.fail(name, e))
    }

    pub fn with_writer(&self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CliResult {
        let file = File::create(self.path(name)).map_err(|e| self.fail(name, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w).and_then(|_| w.flush()).map_err(|e| self.fail(name, e))
    }

    /// Echo of the parsed command line plus values resolved at run time.
    pub fn config<A: Serialize, R: Serialize>(&self, args: &A, resolved: &R) -> CliResult {
        #[derive(Serialize)]
        struct Echo<'a, A, R> {
            version: &'a str,
            args: &'a A,
            resolved: &'a R,
        }
        let echo = Echo { version: env!("CARGO_PKG_VERSION"), args, resolved };
        let text = serde_json::to_string_pretty(&echo).map_err(|e| self.fail("config.json", e))?;
        self.with_writer("config.json", |w| writeln!(w, "{text}"))
    }
}

/// Formats an optional value, empty when absent.
pub fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// A delimited input table with named columns.
pub struct InputTable {
    pub path: PathBuf,
    columns: HashMap<String, usize>,
    pub rows: Vec<csv::StringRecord>,
}

impl InputTable {
    pub fn read(path: &Path) -> CliResult<Self> {
        let file = File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
        let columns = headers.iter().enumerate().map(|(i, h)| (h.to_string(), i)).collect();
        let rows = rdr
            .records()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| Error::Parse { line: i + 2, message: e.to_string() }))
            .collect::<Result<_, _>>()?;
        Ok(Self { path: path.to_path_buf(), columns, rows })
    }

    pub fn column(&self, name: &str) -> CliResult<usize> {
        self.columns.get(name).copied().ok_or_else(|| {
            Error::InvalidInput(format!("{}: no column {name:?}", self.path.display())).into()
        })
    }

    pub fn parse<T: std::str::FromStr>(&self, row: usize, col: usize) -> CliResult<T> {
        let raw = self.rows[row].get(col).unwrap_or("");
        raw.parse::<T>().map_err(|_| {
            Error::Parse { line: row + 2, message: format!("{}: cannot parse {raw:?}", self.path.display()) }.into()
        })
    }

    pub fn floats(&self, col: usize) -> CliResult<Vec<f64>> {
        (0..self.rows.len())
            .map(|r| {
                let v: f64 = self.parse(r, col)?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Parse { line: r + 2, message: format!("non-finite value {v}") }.into())
                }
            })
            .collect()
    }
}

/// Shortest round-trip text for a float, switching to exponent form for
/// very small or very large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}
