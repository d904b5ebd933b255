use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    /// The error bounds straddle the threshold; counted as a failure.
    Inconclusive,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// One comparison of a measured quantity against its threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub status: Status,
    pub value: f64,
    /// Error bound carried by `value`.
    pub error: f64,
    pub comparison: &'static str,
    pub threshold: f64,
}

impl Verdict {
    fn decide(name: &str, value: f64, error: f64, comparison: &'static str, threshold: f64, sure_pass: bool, sure_fail: bool) -> Self {
        let status = if value.is_nan() || sure_fail {
            Status::Fail
        } else if sure_pass {
            Status::Pass
        } else {
            Status::Inconclusive
        };
        Verdict {
            name: name.into(),
            status,
            value,
            error,
            comparison,
            threshold,
        }
    }

    /// `value <= threshold`, with `value` known to within `error`.
    pub fn at_most(name: &str, value: f64, error: f64, threshold: f64) -> Self {
        Self::decide(name, value, error, "<=", threshold, value + error <= threshold, value - error > threshold)
    }

    /// `value >= threshold`, with `value` known to within `error`.
    pub fn at_least(name: &str, value: f64, error: f64, threshold: f64) -> Self {
        Self::decide(name, value, error, ">=", threshold, value - error >= threshold, value + error < threshold)
    }

    /// A count or flag that must hold exactly.
    pub fn holds(name: &str, ok: bool) -> Self {
        Verdict {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            value: if ok { 1.0 } else { 0.0 },
            error: 0.0,
            comparison: "==",
            threshold: 1.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Num(v) => write!(f, "{v:e}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }
}

#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($crate::report::Cell::from($x)),*] };
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config_digest: String,
    pub seed: u64,
    pub kernel: String,
    pub overall: Status,
    pub verdicts: Vec<Verdict>,
    pub summary: BTreeMap<String, Value>,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, digest: &str, seed: u64, kernel: &str) -> Self {
        ExperimentReport {
            experiment: experiment.into(),
            config_digest: digest.into(),
            seed,
            kernel: kernel.into(),
            overall: Status::Pass,
            verdicts: Vec::new(),
            summary: BTreeMap::new(),
            tables: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn verdict(&mut self, v: Verdict) {
        if !v.passed() {
            self.overall = if self.overall == Status::Fail || v.status == Status::Fail {
                Status::Fail
            } else {
                Status::Inconclusive
            };
        }
        self.verdicts.push(v);
    }

    pub fn put(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("summary value serialises");
        self.summary.insert(key.into(), v);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn passed(&self) -> bool {
        self.overall == Status::Pass
    }

    pub fn verdict_named(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    /// Writes `<experiment>.json` and one `<experiment>_<table>.csv` per table; returns the paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, LabError> {
        let io = |e: std::io::Error| LabError::Io(e.to_string());
        std::fs::create_dir_all(dir).map_err(io)?;
        let json = dir.join(format!("{}.json", self.experiment));
        std::fs::write(&json, self.to_json()).map_err(io)?;
        let mut out = vec![json];
        for t in &self.tables {
            let path = dir.join(format!("{}_{}.csv", self.experiment, t.name));
            let mut w = csv::Writer::from_path(&path).map_err(|e| LabError::Io(e.to_string()))?;
            let csv_err = |e: csv::Error| LabError::Io(e.to_string());
            w.write_record(&t.columns).map_err(csv_err)?;
            for r in &t.rows {
                w.write_record(r.iter().map(|c| c.to_string())).map_err(csv_err)?;
            }
            w.flush().map_err(io)?;
            out.push(path);
        }
        Ok(out)
    }
}
