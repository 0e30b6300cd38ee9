//! Output directory bookkeeping: every file written is recorded, and the
//! manifest lists them alongside the resolved configuration.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rydgate::design::{Axis, SweepGrid};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxisSummary {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl From<&Axis> for AxisSummary {
    fn from(a: &Axis) -> Self {
        AxisSummary { name: a.name.clone(), min: a.values[0], max: *a.values.last().unwrap(), points: a.len() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridMeta {
    pub metric: String,
    pub x: AxisSummary,
    pub y: AxisSummary,
    pub failed_cells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub content: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridMeta>,
}

pub struct Sink {
    dir: PathBuf,
    format: Format,
    pub records: Vec<OutputRecord>,
}

impl Sink {
    pub fn create(dir: &Path, format: Format) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Sink { dir: dir.to_path_buf(), format, records: Vec::new() })
    }

    pub fn format(&self) -> Format {
        self.format
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    fn write(&mut self, file: String, content: &str, body: &str, grid: Option<GridMeta>) -> Result<()> {
        let path = self.dir.join(&file);
        fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
        self.records.push(OutputRecord { file, content: content.into(), grid });
        Ok(())
    }

    /// Always JSON, regardless of the table format.
    pub fn json<T: Serialize>(&mut self, stem: &str, content: &str, value: &T) -> Result<()> {
        let body = to_json(value)?;
        self.write(format!("{stem}.json"), content, &body, None)
    }

    /// Tabular data: `csv` as given, or `value` as JSON.
    pub fn table<T: Serialize>(&mut self, stem: &str, content: &str, csv: impl FnOnce() -> String, value: &T) -> Result<()> {
        let body = match self.format {
            Format::Csv => csv(),
            Format::Json => to_json(value)?,
        };
        self.write(format!("{stem}.{}", self.format.extension()), content, &body, None)
    }

    pub fn grid(&mut self, stem: &str, grid: &SweepGrid) -> Result<()> {
        let meta = GridMeta {
            metric: grid.metric.clone(),
            x: (&grid.x).into(),
            y: (&grid.y).into(),
            failed_cells: grid.failures.len(),
        };
        let body = match self.format {
            Format::Csv => grid.to_csv(),
            Format::Json => to_json(grid)?,
        };
        self.write(format!("{stem}.{}", self.format.extension()), "sweep grid", &body, Some(meta))
    }
}

/// Pretty JSON with a trailing newline; non-finite numbers become `null`.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).context("serialization failed")?;
    s.push('\n');
    Ok(s)
}
