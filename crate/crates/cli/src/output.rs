//! Output files: a `#` header with tool version, command and configuration,
//! followed by CSV rows or a plain-text matrix.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{CommandKind, ExperimentConfig};
use crate::CliError;

pub const TOOL: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Accumulates one output file in memory and writes it in one go.
#[derive(Debug)]
pub struct OutputFile {
    path: PathBuf,
    text: String,
}

impl OutputFile {
    /// Starts a file with the standard header. `notes` become extra comment
    /// lines (point parameters, conventions).
    pub fn new(path: PathBuf, kind: CommandKind, config: &ExperimentConfig, notes: &[String]) -> Self {
        let mut text = String::new();
        writeln!(text, "# {TOOL}").unwrap();
        writeln!(text, "# command: {}", kind.name()).unwrap();
        writeln!(text, "# config: {}", config.to_json()).unwrap();
        for n in notes {
            writeln!(text, "# {n}").unwrap();
        }
        Self { path, text }
    }

    pub fn line(&mut self, line: &str) {
        self.text.push_str(line);
        self.text.push('\n');
    }

    /// Comma-joined row.
    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for f in fields {
            if !first {
                self.text.push(',');
            }
            self.text.push_str(f.as_ref());
            first = false;
        }
        self.text.push('\n');
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(self) -> Result<PathBuf, CliError> {
        fs::write(&self.path, self.text).map_err(|e| CliError::Io(format!("{}: {e}", self.path.display())))?;
        Ok(self.path)
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

/// Shortest round-trip representation, switching to exponent form for very
/// small or large magnitudes; stable across runs and platforms.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Compact rate for file names (`4e-5`, `0e0`).
pub fn gamma_tag(g: f64) -> String {
    format!("{g:e}")
}

/// Gnuplot script plotting columns of `data` against column 1.
pub fn gnuplot_lines(data: &Path, title: &str, columns: &[(usize, &str)]) -> String {
    let file = data.file_name().and_then(|s| s.to_str()).unwrap_or("data.csv");
    let mut s = String::new();
    writeln!(s, "set datafile separator ','").unwrap();
    writeln!(s, "set datafile commentschars '#'").unwrap();
    writeln!(s, "set key autotitle columnhead").unwrap();
    writeln!(s, "set title '{title}'").unwrap();
    writeln!(s, "set xlabel 't'").unwrap();
    let parts: Vec<String> = columns
        .iter()
        .enumerate()
        .map(|(i, (c, name))| {
            let src = if i == 0 { format!("'{file}'") } else { "''".to_string() };
            format!("{src} using 1:{c} with lines title '{name}'")
        })
        .collect();
    writeln!(s, "plot {}", parts.join(", \\\n     ")).unwrap();
    s
}

/// Gnuplot script drawing a matrix file as a heat map.
pub fn gnuplot_matrix(data: &Path, title: &str) -> String {
    let file = data.file_name().and_then(|s| s.to_str()).unwrap_or("grid.txt");
    format!(
        "set title '{title}'\nset xlabel 'x0'\nset ylabel 'p0'\nset palette gray negative\nplot '{file}' matrix with image notitle\n"
    )
}

pub fn write_script(data: &Path, script: String) -> Result<PathBuf, CliError> {
    let path = data.with_extension("gp");
    fs::write(&path, script).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}
