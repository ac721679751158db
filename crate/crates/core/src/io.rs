//! Reading matrices, labels and spectra from text files, variable filtering,
//! and report output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::TestReport;
use crate::error::{Result, SigClustError};
use crate::linalg::DataMatrix;

/// Layout of a matrix file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// One variable per line (the usual gene-expression layout).
    #[default]
    VariablesInRows,
    ObservationsInRows,
}

/// Whether a header row or row-name column is present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Presence {
    #[default]
    Auto,
    Present,
    Absent,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub orientation: Orientation,
    pub header: Presence,
    pub row_names: Presence,
}

#[derive(Debug, Clone)]
pub struct LoadedMatrix {
    /// Variables by observations, whatever the file layout.
    pub data: DataMatrix,
    pub header: Option<Vec<String>>,
    pub row_names: Option<Vec<String>>,
    pub warnings: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SigClustError + '_ {
    move |e| SigClustError::io(path, e)
}

fn is_missing(cell: &str) -> bool {
    matches!(
        cell.to_ascii_lowercase().as_str(),
        "na" | "nan" | "inf" | "-inf" | "+inf" | "infinity" | "-infinity"
    )
}

/// Numeric for the purpose of header detection: missing-value markers count as numeric.
fn looks_numeric(cell: &str) -> bool {
    let c = cell.trim();
    is_missing(c) || c.parse::<f64>().is_ok()
}

fn detect_delimiter(text: &str) -> u8 {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.contains('\t') && !first.contains(',') {
        b'\t'
    } else {
        b','
    }
}

/// Load a numeric matrix, auto-detecting a header row and a row-name column.
pub fn load_matrix(path: impl AsRef<Path>, orientation: Orientation) -> Result<DataMatrix> {
    let opts = LoadOptions {
        orientation,
        ..LoadOptions::default()
    };
    Ok(load_matrix_with(path, &opts)?.data)
}

pub fn load_matrix_with(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<LoadedMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_matrix(&text, opts)
}

/// Parse CSV or tab-separated text. Line and column numbers in errors are
/// 1-based positions in the file.
pub fn parse_matrix(text: &str, opts: &LoadOptions) -> Result<LoadedMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(detect_delimiter(text))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut records: Vec<(usize, Vec<String>)> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| SigClustError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            column: None,
            message: e.to_string(),
        })?;
        let line = rec
            .position()
            .map_or(records.len() + 1, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        records.push((line, rec.iter().map(str::to_string).collect()));
    }
    if records.is_empty() {
        return Err(SigClustError::Parse {
            line: 1,
            column: None,
            message: "no data".into(),
        });
    }

    let width = records[0].1.len();
    for (line, fields) in &records {
        if fields.len() != width {
            return Err(SigClustError::Parse {
                line: *line,
                column: None,
                message: format!("expected {width} fields, found {}", fields.len()),
            });
        }
    }

    let mut warnings = Vec::new();
    let probe_row = if records.len() > 1 { 1 } else { 0 };
    let row_names = match opts.row_names {
        Presence::Present => true,
        Presence::Absent => false,
        Presence::Auto => {
            let found = !looks_numeric(&records[probe_row].1[0]);
            if found {
                warnings.push("first column is non-numeric; treating it as row names".into());
            }
            found
        }
    };
    let skip = usize::from(row_names);
    let header = match opts.header {
        Presence::Present => true,
        Presence::Absent => false,
        Presence::Auto => {
            let first = &records[0].1;
            let found = first[0].is_empty() || first[skip..].iter().any(|c| !looks_numeric(c));
            if found {
                warnings.push("first row is non-numeric; treating it as a header".into());
            }
            found
        }
    };

    let header_names = header.then(|| records[0].1[skip..].to_vec());
    let body = &records[usize::from(header)..];
    if width <= skip || body.is_empty() {
        return Err(SigClustError::Parse {
            line: records[0].0,
            column: None,
            message: "no numeric cells".into(),
        });
    }

    let (rows, cols) = (body.len(), width - skip);
    let mut values = Vec::with_capacity(rows * cols);
    for (line, fields) in body {
        for (k, cell) in fields.iter().enumerate().skip(skip) {
            let column = Some(k + 1);
            if is_missing(cell) {
                return Err(SigClustError::InvalidData(format!(
                    "missing or non-finite value '{cell}' at line {line}, column {}",
                    k + 1
                )));
            }
            let v: f64 = cell.parse().map_err(|_| SigClustError::Parse {
                line: *line,
                column,
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(SigClustError::InvalidData(format!(
                    "non-finite value at line {line}, column {}",
                    k + 1
                )));
            }
            values.push(v);
        }
    }
    let names = row_names.then(|| body.iter().map(|(_, f)| f[0].clone()).collect());

    // `values` holds the file rows one after another, i.e. the column-major
    // layout of the transposed file matrix.
    let by_file_rows = nalgebra::DMatrix::from_column_slice(cols, rows, &values);
    let (matrix, header_names, names) = match opts.orientation {
        Orientation::VariablesInRows => (by_file_rows.transpose(), header_names, names),
        Orientation::ObservationsInRows => (by_file_rows, names, header_names),
    };
    Ok(LoadedMatrix {
        data: DataMatrix::new(matrix)?,
        header: header_names,
        row_names: names,
        warnings,
    })
}

/// Write variables in rows as plain CSV with shortest round-trip decimals.
pub fn write_matrix(path: impl AsRef<Path>, x: &DataMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for i in 0..x.d() {
        let row: Vec<String> = x.row(i).iter().map(f64::to_string).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

/// One label, 1 or 2, per line. Blank lines are ignored.
pub fn parse_labels(text: &str) -> Result<Vec<u8>> {
    let mut labels = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        match t {
            "1" => labels.push(1),
            "2" => labels.push(2),
            _ => {
                return Err(SigClustError::Parse {
                    line: i + 1,
                    column: Some(1),
                    message: format!("label must be 1 or 2, found '{t}'"),
                })
            }
        }
    }
    Ok(labels)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    parse_labels(&fs::read_to_string(path).map_err(io_err(path))?)
}

/// Numbers separated by commas, whitespace or newlines.
pub fn parse_spectrum(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let tokens = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty());
        for (k, tok) in tokens.enumerate() {
            let v: f64 = tok.parse().map_err(|_| SigClustError::Parse {
                line: i + 1,
                column: Some(k + 1),
                message: format!("'{tok}' is not a number"),
            })?;
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err(SigClustError::InvalidSpectra(
            "spectrum file has no values".into(),
        ));
    }
    Ok(out)
}

pub fn read_spectrum(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    parse_spectrum(&fs::read_to_string(path).map_err(io_err(path))?)
}

/// Indices, in original order, of the `top_k` variables with the largest
/// coefficient of variation.
///
/// Variables whose mean is not positive have no meaningful ratio; they rank
/// below every positive-mean variable and among themselves by standard
/// deviation.
pub fn select_variables(x: &DataMatrix, top_k: usize) -> Result<Vec<usize>> {
    let d = x.d();
    if top_k < 1 || top_k > d {
        return Err(SigClustError::InvalidConfig(format!(
            "filter top-k must be in 1..={d}, got {top_k}"
        )));
    }
    let n = x.n() as f64;
    let mut keyed: Vec<(bool, f64, usize)> = (0..d)
        .map(|i| {
            let row = x.row(i);
            let mean = row.iter().sum::<f64>() / n;
            let sd = (row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            if mean > 0.0 {
                (true, sd / mean, i)
            } else {
                (false, sd, i)
            }
        })
        .collect();
    keyed.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
    let mut keep: Vec<usize> = keyed[..top_k].iter().map(|k| k.2).collect();
    keep.sort_unstable();
    Ok(keep)
}

pub fn filter_variables(x: &DataMatrix, top_k: usize) -> Result<DataMatrix> {
    let keep = select_variables(x, top_k)?;
    Ok(DataMatrix::from_trusted(
        x.values().select_rows(keep.iter()),
    ))
}

/// Echo of a `test` invocation stored with its report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub input: PathBuf,
    pub orientation: Orientation,
    pub method: String,
    pub n_sim: usize,
    pub seed: u64,
    pub labels: Option<PathBuf>,
    pub filter_top_k: Option<usize>,
    /// Execution detail only; kept out of the report so it stays identical across machines.
    #[serde(skip)]
    pub out_dir: PathBuf,
    #[serde(skip)]
    pub workers: Option<usize>,
}

/// The full JSON report document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub version: String,
    pub config: RunManifest,
    /// Consistency problems found in the report; empty in a healthy run.
    pub flags: Vec<String>,
    pub report: TestReport,
}

impl ReportDocument {
    pub fn new(report: TestReport, manifest: RunManifest) -> Self {
        ReportDocument {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: manifest,
            flags: report_flags(&report),
            report,
        }
    }

    /// Pretty JSON. Without timing the output depends only on data and configuration.
    pub fn to_json(&self, include_timing: bool) -> Result<String> {
        let mut v = serde_json::to_value(self).map_err(json_err)?;
        if !include_timing {
            if let Some(r) = v.get_mut("report").and_then(|r| r.as_object_mut()) {
                r.shift_remove("timing_seconds");
            }
        }
        let mut s = serde_json::to_string_pretty(&v).map_err(json_err)?;
        s.push('\n');
        Ok(s)
    }
}

fn json_err(e: serde_json::Error) -> SigClustError {
    SigClustError::InvalidData(format!("json: {e}"))
}

/// Impossible values in a report.
pub fn report_flags(report: &TestReport) -> Vec<String> {
    let mut flags = Vec::new();
    let floor = 1.0 / (report.n_sim as f64 + 1.0);
    if report.p_empirical < floor {
        flags.push(format!(
            "empirical p-value {} is below the floor 1/(n_sim+1) = {}",
            format_p(report.p_empirical),
            format_p(floor)
        ));
    }
    if report.null_cis.len() != report.n_sim {
        flags.push(format!(
            "{} null cluster indices for n_sim = {}",
            report.null_cis.len(),
            report.n_sim
        ));
    }
    if report.null_cis.iter().any(|c| !(0.0..=1.0).contains(c)) {
        flags.push("null cluster index outside [0, 1]".into());
    }
    flags
}

/// A probability with at least six significant digits.
pub fn format_p(p: f64) -> String {
    if p == 0.0 || !p.is_finite() {
        return format!("{p:.6}");
    }
    let magnitude = p.abs().log10().floor() as i32;
    if magnitude < -8 {
        return format!("{p:.5e}");
    }
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{p:.decimals$}")
}

pub fn parse_report(text: &str) -> Result<ReportDocument> {
    serde_json::from_str(text).map_err(|e| SigClustError::Parse {
        line: e.line(),
        column: Some(e.column()),
        message: e.to_string(),
    })
}

/// Files written by [`emit_report`].
#[derive(Debug, Clone)]
pub struct EmittedFiles {
    pub report: PathBuf,
    pub null_cis: PathBuf,
    pub ecdf: PathBuf,
}

/// Null cluster indices in replication order.
pub fn null_cis_csv(report: &TestReport) -> String {
    let mut out = String::from("replication,ci\n");
    for (r, ci) in report.null_cis.iter().enumerate() {
        out.push_str(&format!("{r},{ci}\n"));
    }
    out
}

/// Sorted null cluster indices with their empirical CDF, for plotting.
pub fn ecdf_csv(report: &TestReport) -> String {
    let mut sorted = report.null_cis.clone();
    sorted.sort_by(f64::total_cmp);
    let len = sorted.len() as f64;
    let mut out = String::from("ci,ecdf\n");
    for (i, ci) in sorted.iter().enumerate() {
        out.push_str(&format!("{ci},{}\n", (i + 1) as f64 / len));
    }
    out
}

/// Write `report.json`, `null_cis.csv` and `ecdf.csv` into the manifest's output directory.
pub fn emit_report(report: &TestReport, manifest: &RunManifest) -> Result<EmittedFiles> {
    let dir = manifest.out_dir.as_path();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = EmittedFiles {
        report: dir.join("report.json"),
        null_cis: dir.join("null_cis.csv"),
        ecdf: dir.join("ecdf.csv"),
    };
    let doc = ReportDocument::new(report.clone(), manifest.clone());
    let write = |p: &Path, s: String| fs::write(p, s).map_err(io_err(p));
    write(&files.report, doc.to_json(true)?)?;
    write(&files.null_cis, null_cis_csv(report))?;
    write(&files.ecdf, ecdf_csv(report))?;
    Ok(files)
}
