//! CSV ingestion, experiment configuration, and result serialization.
//!
//! Floats are written with 17 significant digits so every value round-trips
//! bit-exactly through its text form.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::datagen::{GeneratorKind, Provenance};
use crate::error::{Error, Result};
use crate::eval::SweepResult;
use crate::fit::{SubspaceModel, Termination, TrimmedFitReport};
use crate::matrix::{self, DataMatrix};
use crate::stiefel::Frame;

/// Serializes a float with 17 significant digits.
pub fn fmt_float(value: f64) -> String {
    format!("{value:.16e}")
}

/// Loads a comma-separated matrix. A single leading header line is skipped
/// when any of its fields fails to parse as a number.
pub fn load_csv(path: &Path) -> Result<DataMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (index, line) in text.lines().enumerate() {
        let line_no = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(values) => values,
            Err(_) if index == 0 => continue, // header
            Err(_) => {
                return Err(Error::data(
                    path,
                    Some(line_no),
                    "field is not a number".to_string(),
                ));
            }
        };
        if let Some(w) = width {
            if values.len() != w {
                return Err(Error::data(
                    path,
                    Some(line_no),
                    format!("expected {w} fields, found {}", values.len()),
                ));
            }
        } else {
            width = Some(values.len());
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "{} at {}:{line_no}",
                bad,
                path.display()
            )));
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::data(path, None, "no data rows".to_string()));
    }
    matrix::from_rows(rows)
}

/// Which estimator a command runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Trpca,
    Pca,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Trpca => "trpca",
            MethodKind::Pca => "pca",
        }
    }
}

impl std::str::FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trpca" => Ok(MethodKind::Trpca),
            "pca" => Ok(MethodKind::Pca),
            other => Err(Error::InvalidParameter(format!(
                "unknown method '{other}' (expected trpca or pca)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Fit,
    Sweep,
    Bgsub,
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CommandKind::Fit => "fit",
            CommandKind::Sweep => "sweep",
            CommandKind::Bgsub => "bgsub",
        };
        f.write_str(s)
    }
}

/// Everything a run was configured with; echoed into output artifacts.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    pub input: Option<PathBuf>,
    pub frames: Option<PathBuf>,
    pub k: usize,
    /// Resolved trim count; `None` means the default `ceil(n/2)` had not
    /// been bound to a dataset yet.
    pub t: Option<usize>,
    pub restarts: usize,
    pub eps: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub method: MethodKind,
    pub generator: Option<GeneratorKind>,
    pub grid_lambda: Vec<f64>,
    pub reps: usize,
}

impl ExperimentConfig {
    pub fn new(command: CommandKind, k: usize, out: PathBuf) -> Self {
        ExperimentConfig {
            command,
            input: None,
            frames: None,
            k,
            t: None,
            restarts: 10,
            eps: 1e-9,
            max_iter: 1000,
            seed: 0,
            out,
            method: MethodKind::Trpca,
            generator: None,
            grid_lambda: Vec::new(),
            reps: 5,
        }
    }

    /// `config.<field> = <value>` lines for set fields, in a fixed order.
    pub fn echo_lines(&self) -> Vec<String> {
        let mut lines = vec![format!("config.command = {}", self.command)];
        if let Some(input) = &self.input {
            lines.push(format!("config.input = {}", input.display()));
        }
        if let Some(frames) = &self.frames {
            lines.push(format!("config.frames = {}", frames.display()));
        }
        lines.push(format!("config.k = {}", self.k));
        if let Some(t) = self.t {
            lines.push(format!("config.t = {t}"));
        }
        lines.push(format!("config.restarts = {}", self.restarts));
        lines.push(format!("config.eps = {}", fmt_float(self.eps)));
        lines.push(format!("config.max_iter = {}", self.max_iter));
        lines.push(format!("config.seed = {}", self.seed));
        lines.push(format!("config.out = {}", self.out.display()));
        lines.push(format!("config.method = {}", self.method.name()));
        if let Some(generator) = self.generator {
            lines.push(format!("config.generator = {}", generator.name()));
        }
        if !self.grid_lambda.is_empty() {
            let grid: Vec<String> = self.grid_lambda.iter().map(|&l| fmt_float(l)).collect();
            lines.push(format!("config.grid_lambda = {}", grid.join(" ")));
        }
        if self.command == CommandKind::Sweep {
            lines.push(format!("config.reps = {}", self.reps));
        }
        lines
    }
}

fn join_floats(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(fmt_float)
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes the structured fit document: config echo, provenance (if any),
/// termination, objective trace, selection, and the fitted model.
pub fn write_fit_document(
    path: &Path,
    config: &ExperimentConfig,
    report: &TrimmedFitReport,
    provenance: Option<&Provenance>,
) -> Result<()> {
    let mut lines = vec!["trpca-fit v1".to_string()];
    lines.extend(config.echo_lines());
    if let Some(prov) = provenance {
        lines.push(format!("provenance.generator = {}", prov.generator));
        lines.push(format!("provenance.seed = {}", prov.seed));
        for (key, value) in &prov.parameters {
            lines.push(format!("provenance.param.{key} = {value}"));
        }
        for note in &prov.notes {
            lines.push(format!("provenance.note = {note}"));
        }
    }
    lines.push(format!("termination = {}", report.termination));
    lines.push(format!("iterations = {}", report.iterations));
    lines.push(format!(
        "objective_trace = {}",
        join_floats(report.objective_trace.iter().copied())
    ));
    lines.push(format!(
        "selected_indices = {}",
        report
            .selected_indices
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    ));
    let model = &report.model;
    lines.push(format!(
        "center = {}",
        join_floats(model.center.iter().copied())
    ));
    lines.push(format!("basis.rows = {}", model.basis.rows()));
    lines.push(format!("basis.cols = {}", model.basis.cols()));
    let basis = model.basis.matrix();
    lines.push(format!(
        "basis = {}",
        join_floats((0..basis.nrows()).flat_map(|i| {
            (0..basis.ncols())
                .map(move |j| basis[(i, j)])
                .collect::<Vec<_>>()
        }))
    ));
    lines.push(String::new());
    write_file(path, &lines.join("\n"))
}

/// A fit document read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FitDocument {
    pub model: SubspaceModel,
    pub objective_trace: Vec<f64>,
    pub selected_indices: Vec<usize>,
    pub iterations: usize,
    pub termination: Termination,
    /// Raw `key = value` pairs in file order, config echo included.
    pub fields: Vec<(String, String)>,
}

fn parse_floats(path: &Path, line: usize, value: &str) -> Result<Vec<f64>> {
    value
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::data(path, Some(line), format!("bad float '{tok}'")))
        })
        .collect()
}

/// Parses a document produced by [`write_fit_document`].
pub fn read_fit_document(path: &Path) -> Result<FitDocument> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "trpca-fit v1")) => {}
        _ => return Err(Error::data(path, Some(1), "missing trpca-fit v1 header")),
    }

    let mut fields: Vec<(String, String)> = Vec::new();
    for (index, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let (key, value) = line.split_once(" = ").ok_or_else(|| {
            Error::data(path, Some(index + 1), "expected 'key = value'".to_string())
        })?;
        fields.push((key.to_string(), value.to_string()));
    }

    let lookup = |key: &str| -> Result<&str> {
        fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::data(path, None, format!("missing field '{key}'")))
    };

    let termination: Termination = lookup("termination")?.parse()?;
    let iterations: usize = lookup("iterations")?
        .parse()
        .map_err(|_| Error::data(path, None, "bad iterations"))?;
    let objective_trace = parse_floats(path, 0, lookup("objective_trace")?)?;
    let selected_indices: Vec<usize> = lookup("selected_indices")?
        .split_whitespace()
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|_| Error::data(path, None, format!("bad index '{tok}'")))
        })
        .collect::<Result<_>>()?;
    let rows: usize = lookup("basis.rows")?
        .parse()
        .map_err(|_| Error::data(path, None, "bad basis.rows"))?;
    let cols: usize = lookup("basis.cols")?
        .parse()
        .map_err(|_| Error::data(path, None, "bad basis.cols"))?;
    let center_values = parse_floats(path, 0, lookup("center")?)?;
    let basis_values = parse_floats(path, 0, lookup("basis")?)?;
    if basis_values.len() != rows * cols {
        return Err(Error::data(
            path,
            None,
            format!(
                "basis holds {} values but {rows}x{cols} were declared",
                basis_values.len()
            ),
        ));
    }
    let basis = DMatrix::from_row_iterator(rows, cols, basis_values);
    let model = SubspaceModel::new(DVector::from_vec(center_values), Frame::new(basis)?)?;

    Ok(FitDocument {
        model,
        objective_trace,
        selected_indices,
        iterations,
        termination,
        fields,
    })
}

/// Writes sweep cells as `lambda,method,mean_tre,std_tre,runs,seed`.
pub fn write_sweep_csv(path: &Path, result: &SweepResult) -> Result<()> {
    let mut out = String::from("lambda,method,mean_tre,std_tre,runs,seed\n");
    for cell in &result.cells {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_float(cell.lambda),
            cell.method.name(),
            fmt_float(cell.mean_tre),
            fmt_float(cell.std_tre),
            cell.runs,
            result.config.seed,
        ));
    }
    write_file(path, &out)
}

/// Writes per-frame errors as `frame_index,reconstruction_error`.
pub fn write_frame_errors_csv(path: &Path, errors: &[f64]) -> Result<()> {
    let mut out = String::from("frame_index,reconstruction_error\n");
    for (index, &error) in errors.iter().enumerate() {
        out.push_str(&format!("{index},{}\n", fmt_float(error)));
    }
    write_file(path, &out)
}
