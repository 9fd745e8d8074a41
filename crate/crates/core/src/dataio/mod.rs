//! Time-series ingestion and persistence of traces, manifests and plots.
//!
//! Input datasets are CSV files with a `t,u,y` header (extra columns are
//! ignored). Lines starting with `#` are comments; comments of the form
//! `# key: value` are collected as dataset metadata.
//!
//! Trace files use the columns `t,u,y,yhat,e,a_hat,b_hat,c_hat`, followed by
//! `e1,e2,eps` for second-order estimators. Every value is written in
//! scientific notation with 17 significant digits, which is byte-stable
//! across platforms and round-trips `f64` exactly.

mod manifest;
mod plot;

pub use manifest::{read_manifest, write_manifest, Manifest, TOOLKIT_VERSION};
pub use plot::{emit_plot, write_chart, ChartSeries};

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::adapt::EstimatorKind;
use crate::scalar::Scalar;
use crate::trace::{PlantTrace, RunTrace, SecondOrderChannels, BASE_COLUMNS, SECOND_ORDER_COLUMNS};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: cannot parse {value:?} as a number")]
    Parse { row: usize, column: String, value: String },
    #[error("row {row}, column `{column}`: value is not finite")]
    NonFinite { row: usize, column: String },
    #[error("row {row}: time is not strictly increasing")]
    NonMonotone { row: usize },
    #[error("columns t, u, y must have equal lengths")]
    LengthMismatch,
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("no channels selected for plotting")]
    NoChannels,
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
}

impl DataError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn csv(path: &Path, source: csv::Error) -> Self {
        DataError::Csv {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Measured input/output samples with strictly increasing time.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub name: String,
    t: Vec<T>,
    u: Vec<T>,
    y: Vec<T>,
    /// Free-form annotations such as strain, osmolyte or molarity.
    pub metadata: BTreeMap<String, String>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(name: impl Into<String>, t: Vec<T>, u: Vec<T>, y: Vec<T>) -> Result<Self, DataError> {
        if t.len() != u.len() || t.len() != y.len() {
            return Err(DataError::LengthMismatch);
        }
        for (col, v) in [("t", &t), ("u", &u), ("y", &y)] {
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(DataError::NonFinite {
                    row: i + 1,
                    column: col.into(),
                });
            }
        }
        if let Some(i) = t.windows(2).position(|w| w[1] <= w[0]) {
            return Err(DataError::NonMonotone { row: i + 2 });
        }
        Ok(Self {
            name: name.into(),
            t,
            u,
            y,
            metadata: BTreeMap::new(),
        })
    }

    pub fn t(&self) -> &[T] {
        &self.t
    }

    pub fn u(&self) -> &[T] {
        &self.u
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Formats one value for trace files.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize, DataError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| DataError::MissingColumn(name.into()))
}

fn parse_cell(record: &csv::StringRecord, idx: usize, row: usize, column: &str) -> Result<f64, DataError> {
    let raw = record.get(idx).unwrap_or("");
    let v: f64 = raw.parse().map_err(|_| DataError::Parse {
        row,
        column: column.into(),
        value: raw.into(),
    })?;
    if !v.is_finite() {
        return Err(DataError::NonFinite {
            row,
            column: column.into(),
        });
    }
    Ok(v)
}

fn reader(path: &Path) -> Result<csv::Reader<File>, DataError> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DataError::csv(path, e))
}

/// Reads selected numeric columns. Rows are numbered from 1 after the header.
fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>, DataError> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| DataError::csv(path, e))?.clone();
    let idx = names
        .iter()
        .map(|n| column_index(&headers, n))
        .collect::<Result<Vec<_>, _>>()?;
    let mut cols = vec![Vec::new(); names.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| DataError::csv(path, e))?;
        for (c, (&j, name)) in idx.iter().zip(names).enumerate() {
            cols[c].push(parse_cell(&rec, j, i + 1, name)?);
        }
    }
    Ok(cols)
}

fn read_metadata(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.trim_start().strip_prefix('#'))
        .filter_map(|l| l.split_once(':').or_else(|| l.split_once('=')))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .filter(|(k, _)| !k.is_empty())
        .collect()
}

/// Loads a `t,u,y` time series.
pub fn read_timeseries_csv(path: impl AsRef<Path>) -> Result<Dataset<f64>, DataError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let mut cols = read_columns(path, &["t", "u", "y"])?;
    let y = cols.pop().unwrap();
    let u = cols.pop().unwrap();
    let t = cols.pop().unwrap();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut ds = Dataset::new(name, t, u, y)?;
    ds.metadata = read_metadata(&text);
    Ok(ds)
}

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>, DataError> {
    let f = File::create(path).map_err(|e| DataError::io(path, e))?;
    Ok(csv::WriterBuilder::new().from_writer(BufWriter::new(f)))
}

fn write_rows<T: Scalar>(
    path: &Path,
    header: &[&str],
    columns: &[&[T]],
    stride: usize,
) -> Result<(), DataError> {
    let mut w = create(path)?;
    w.write_record(header).map_err(|e| DataError::csv(path, e))?;
    let n = columns.first().map_or(0, |c| c.len());
    let stride = stride.max(1);
    let mut row = Vec::with_capacity(columns.len());
    let mut k = 0;
    while k < n {
        row.clear();
        row.extend(columns.iter().map(|c| format_value(c[k].to_f64_lossy())));
        w.write_record(&row).map_err(|e| DataError::csv(path, e))?;
        // always keep the final sample
        k = if k + stride >= n && k != n - 1 { n - 1 } else { k + stride };
    }
    let mut inner = w.into_inner().map_err(|e| DataError::io(path, e.into_error()))?;
    inner.flush().map_err(|e| DataError::io(path, e))
}

/// Writes every sample of `trace`.
pub fn write_trace_csv<T: Scalar>(trace: &RunTrace<T>, path: impl AsRef<Path>) -> Result<(), DataError> {
    write_trace_csv_strided(trace, path, 1)
}

/// Writes every `stride`-th sample of `trace`, always including the last.
pub fn write_trace_csv_strided<T: Scalar>(
    trace: &RunTrace<T>,
    path: impl AsRef<Path>,
    stride: usize,
) -> Result<(), DataError> {
    let cols = trace.columns();
    let data: Vec<&[T]> = cols.iter().map(|c| trace.channel(c).unwrap()).collect();
    write_rows(path.as_ref(), &cols, &data, stride)
}

/// Reads a trace file written by [`write_trace_csv`]. Second-order channels
/// are picked up when their columns are present.
pub fn read_trace_csv(path: impl AsRef<Path>, kind: EstimatorKind) -> Result<RunTrace<f64>, DataError> {
    let path = path.as_ref();
    let headers = reader(path)?
        .headers()
        .map_err(|e| DataError::csv(path, e))?
        .clone();
    let second = SECOND_ORDER_COLUMNS.iter().all(|c| headers.iter().any(|h| h == *c));
    let mut names: Vec<&str> = BASE_COLUMNS.to_vec();
    if second {
        names.extend(SECOND_ORDER_COLUMNS);
    }
    let mut cols = read_columns(path, &names)?;
    let mut tr = RunTrace::empty(kind);
    if second {
        let eps = cols.pop().unwrap();
        let e2 = cols.pop().unwrap();
        let e1 = cols.pop().unwrap();
        tr.second_order = Some(SecondOrderChannels { e1, e2, eps });
    } else {
        tr.second_order = None;
    }
    let mut it = cols.into_iter();
    tr.t = it.next().unwrap();
    tr.u = it.next().unwrap();
    tr.y = it.next().unwrap();
    tr.yhat = it.next().unwrap();
    tr.e = it.next().unwrap();
    tr.a_hat = it.next().unwrap();
    tr.b_hat = it.next().unwrap();
    tr.c_hat = it.next().unwrap();
    Ok(tr)
}

/// Writes a plant-only simulation as `t,u,du,y,x1[,x2]`. The file is also a
/// valid dataset for [`read_timeseries_csv`].
pub fn write_plant_trace_csv<T: Scalar>(
    trace: &PlantTrace<T>,
    path: impl AsRef<Path>,
    stride: usize,
) -> Result<(), DataError> {
    let mut header = vec!["t", "u", "du", "y", "x1"];
    let mut data: Vec<&[T]> = vec![&trace.t, &trace.u, &trace.du, &trace.y, &trace.x[0]];
    if trace.x.len() > 1 {
        header.push("x2");
        data.push(&trace.x[1]);
    }
    write_rows(path.as_ref(), &header, &data, stride)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_minimal_file() {
        let f = write_tmp("t,u,y\n0,0,1.237\n1,1,1.30\n");
        let ds = read_timeseries_csv(f.path()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.y(), &[1.237, 1.30]);
    }

    #[test]
    fn comments_and_metadata() {
        let f = write_tmp("# strain: wild-type\n# molarity = 0.2\nt,y,u\n# mid comment\n0,1.2,0\n0.5,1.3,1\n");
        let ds = read_timeseries_csv(f.path()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.u(), &[0.0, 1.0]);
        assert_eq!(ds.metadata.get("strain").map(String::as_str), Some("wild-type"));
        assert_eq!(ds.metadata.get("molarity").map(String::as_str), Some("0.2"));
    }

    #[test]
    fn non_monotone_time_reports_row() {
        let f = write_tmp("t,u,y\n5,0,1\n5,1,2\n");
        match read_timeseries_csv(f.path()) {
            Err(DataError::NonMonotone { row }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column_and_bad_number() {
        let f = write_tmp("t,u\n0,0\n");
        assert!(matches!(read_timeseries_csv(f.path()), Err(DataError::MissingColumn(c)) if c == "y"));
        let f = write_tmp("t,u,y\n0,0,1\n1,abc,2\n");
        match read_timeseries_csv(f.path()) {
            Err(DataError::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "u");
            }
            other => panic!("unexpected {other:?}"),
        }
        let f = write_tmp("t,u,y\n0,0,inf\n");
        assert!(matches!(read_timeseries_csv(f.path()), Err(DataError::NonFinite { .. })));
        assert!(matches!(
            read_timeseries_csv("/nonexistent/file.csv"),
            Err(DataError::Io { .. })
        ));
    }

    #[test]
    fn empty_trace_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_trace_csv(&RunTrace::<f64>::empty(EstimatorKind::FirstOrder), &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "t,u,y,yhat,e,a_hat,b_hat,c_hat\n");
        write_trace_csv(&RunTrace::<f64>::empty(EstimatorKind::SecondOrder), &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.trim_end().split(',').count(), 11);
    }

    #[test]
    fn value_format_is_fixed_width() {
        assert_eq!(format_value(1.237), "1.2370000000000001e0");
        assert_eq!(format_value(-0.5), "-5.0000000000000000e-1");
        assert_eq!(format_value(0.0), "0.0000000000000000e0");
    }
}
