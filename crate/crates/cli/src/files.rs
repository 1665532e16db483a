//! CSV schemas. Every file starts with a `# qaoi-sched <kind> v1` line,
//! followed by a fixed header row.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvKind {
    Pmf,
    Ccdf,
    Trace,
    Metrics,
    Compare,
}

impl CsvKind {
    pub fn name(self) -> &'static str {
        match self {
            CsvKind::Pmf => "pmf",
            CsvKind::Ccdf => "ccdf",
            CsvKind::Trace => "trace",
            CsvKind::Metrics => "metrics",
            CsvKind::Compare => "compare",
        }
    }

    pub fn header(self) -> &'static [&'static str] {
        match self {
            CsvKind::Pmf => &["phase", "age", "probability"],
            CsvKind::Ccdf => &["metric", "age", "ccdf"],
            CsvKind::Trace => &["t", "age", "tokens", "err_state", "query_state", "action", "delivered", "is_query"],
            CsvKind::Metrics => &[
                "scenario",
                "policy",
                "epsilon",
                "seeds",
                "avg_aoi",
                "avg_aoi_se",
                "avg_qaoi",
                "avg_qaoi_se",
                "n_queries",
                "token_mean",
                "token_p10",
                "token_p50",
                "token_p90",
                "delta_max_occupancy",
            ],
            CsvKind::Compare => &["epsilon", "aoi_a", "aoi_b", "aoi_delta", "qaoi_a", "qaoi_b", "qaoi_delta"],
        }
    }

    pub fn magic(self) -> String {
        format!("# qaoi-sched {} v{SCHEMA_VERSION}", self.name())
    }
}

/// `phase` is a phase index (slots since the last query), `all` for the
/// unconditional age, or `query` for the age at query instants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmfRow {
    pub phase: String,
    pub age: u32,
    pub probability: f64,
}

/// `P(metric > age)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfRow {
    pub metric: String,
    pub age: u32,
    pub ccdf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCsvRow {
    pub t: u64,
    pub age: u32,
    pub tokens: u32,
    pub err_state: usize,
    pub query_state: usize,
    pub action: u8,
    pub delivered: u8,
    pub is_query: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scenario: String,
    pub policy: String,
    /// Swept erasure probability; empty for explicit error chains.
    pub epsilon: Option<f64>,
    pub seeds: usize,
    pub avg_aoi: f64,
    pub avg_aoi_se: f64,
    pub avg_qaoi: f64,
    pub avg_qaoi_se: f64,
    pub n_queries: u64,
    pub token_mean: f64,
    pub token_p10: u32,
    pub token_p50: u32,
    pub token_p90: u32,
    pub delta_max_occupancy: f64,
}

/// Differences are `a - b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub epsilon: Option<f64>,
    pub aoi_a: f64,
    pub aoi_b: f64,
    pub aoi_delta: f64,
    pub qaoi_a: f64,
    pub qaoi_b: f64,
    pub qaoi_delta: f64,
}

pub fn write_rows<W: Write, T: Serialize>(mut out: W, kind: CsvKind, rows: &[T]) -> Result<(), csv::Error> {
    writeln!(out, "{}", kind.magic())?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    // written explicitly so an empty table still has its header
    w.write_record(kind.header())?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `rows` to `path` with the schema of `kind`.
pub fn write_csv<T: Serialize>(path: &Path, kind: CsvKind, rows: &[T]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_rows(BufWriter::new(file), kind, rows).map_err(|source| CliError::Csv { path: path.to_path_buf(), source })
}

/// Reads a file written by [`write_csv`], checking the version line and the
/// header row.
pub fn read_csv<T: DeserializeOwned>(path: &Path, kind: CsvKind) -> Result<Vec<T>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| CliError::io(path, e))?;
    let schema = |reason: String| CliError::Schema { path: path.to_path_buf(), reason };
    if first.trim_end() != kind.magic() {
        return Err(schema(format!("expected `{}`, found `{}`", kind.magic(), first.trim_end())));
    }
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(|e| schema(e.to_string()))?;
    if header.iter().ne(kind.header().iter().copied()) {
        return Err(schema(format!("unexpected header {header:?}")));
    }
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(|e| schema(e.to_string()))
}
