//! Result directory: CSV tables, SVG plots and the manifest that lists them.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::svg::Plot;

pub const MANIFEST: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) if v.is_nan() => "NaN".to_string(),
            Cell::Num(v) if v.is_infinite() => if *v > 0.0 { "inf" } else { "-inf" }.to_string(),
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// A CSV table whose header row carries `name (unit)` labels.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[(&str, &str)]) -> Self {
        let header = columns.iter().map(|(c, u)| format!("{c} ({u})")).collect();
        Table { name: name.to_string(), header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }
}

/// Files written so far, in order.
#[derive(Debug)]
pub struct OutputDir {
    pub path: PathBuf,
    pub svg: bool,
    files: Vec<String>,
    notes: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

impl OutputDir {
    /// Create `path`, refusing a non-empty directory unless `overwrite`;
    /// with `overwrite`, files listed by an earlier manifest are removed.
    pub fn prepare(path: &Path, overwrite: bool, svg: bool) -> Result<Self> {
        if path.exists() {
            let occupied = fs::read_dir(path).map_err(io_err(path))?.next().is_some();
            if occupied && !overwrite {
                return Err(CliError::Collision(path.to_path_buf()));
            }
            let manifest = path.join(MANIFEST);
            if manifest.exists() {
                let text = fs::read_to_string(&manifest).map_err(io_err(&manifest))?;
                for name in text.lines().filter_map(|l| l.strip_prefix("file = ")) {
                    let f = path.join(name);
                    if f.is_file() {
                        fs::remove_file(&f).map_err(io_err(&f))?;
                    }
                }
                fs::remove_file(&manifest).map_err(io_err(&manifest))?;
            }
        }
        fs::create_dir_all(path).map_err(io_err(path))?;
        Ok(OutputDir { path: path.to_path_buf(), svg, files: Vec::new(), notes: Vec::new() })
    }

    pub fn write_table(&mut self, table: &Table) -> Result<()> {
        let file = format!("{}.csv", table.name);
        let path = self.path.join(&file);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush().map_err(io_err(&path))?;
        self.files.push(file);
        Ok(())
    }

    pub fn write_plot(&mut self, name: &str, plot: &Plot) -> Result<()> {
        if !self.svg {
            return Ok(());
        }
        let file = format!("{name}.svg");
        let path = self.path.join(&file);
        fs::write(&path, plot.render()).map_err(io_err(&path))?;
        self.files.push(file);
        Ok(())
    }

    /// Free-form line recorded in the manifest, e.g. a skipped experiment.
    pub fn note(&mut self, text: String) {
        self.notes.push(text);
    }

    /// Resolved configuration, version, seeds and the list of files.
    pub fn write_manifest(&self, config: &ExperimentConfig, experiment: Experiment) -> Result<()> {
        let mut text = String::from("# nlfp run manifest\n");
        text += &format!("nlfp.version = {}\n", env!("CARGO_PKG_VERSION"));
        text += &format!("run.experiment = {experiment}\n");
        for (k, v) in config.resolved() {
            text += &format!("config.{k} = {v}\n");
        }
        text += &format!("seed.master = {}\n", config.seed);
        text += &format!("seed.streams = 0..{}\n", config.particles);
        for n in &self.notes {
            text += &format!("note = {n}\n");
        }
        for f in &self.files {
            text += &format!("file = {f}\n");
        }
        let path = self.path.join(MANIFEST);
        fs::write(&path, text).map_err(io_err(&path))
    }
}
