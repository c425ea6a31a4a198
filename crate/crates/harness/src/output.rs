//! Result tables and the files they are written to.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_header(name: &str, header: Vec<String>) -> Self {
        Self {
            name: name.to_string(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    /// Column index by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Formats a float cell; non-finite values become `NA`.
pub fn fcell(x: f64) -> String {
    let a = x.abs();
    if !x.is_finite() {
        "NA".to_string()
    } else if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => {
        vec![$($crate::output::Cell::to_cell(&$x)),*]
    };
}

/// Conversion used by [`row!`].
pub trait Cell {
    fn to_cell(&self) -> String;
}

impl Cell for f64 {
    fn to_cell(&self) -> String {
        fcell(*self)
    }
}

impl Cell for Option<f64> {
    fn to_cell(&self) -> String {
        self.map_or_else(|| "NA".to_string(), fcell)
    }
}

impl Cell for Option<usize> {
    fn to_cell(&self) -> String {
        self.map_or_else(|| "NA".to_string(), |x| x.to_string())
    }
}

macro_rules! display_cell {
    ($($t:ty),*) => {
        $(impl Cell for $t {
            fn to_cell(&self) -> String {
                self.to_string()
            }
        })*
    };
}

display_cell!(usize, u64, bool, String, &str, spikelearn::Rule);

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub index: usize,
    pub seed: u64,
}

/// Everything an experiment hands to [`emit_results`].
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub tables: Vec<Table>,
    pub runs: Vec<RunRecord>,
    /// Free-form timing section of the manifest (seconds).
    pub wall_times: Value,
    /// Set when the experiment as a whole did not achieve its goal.
    pub failure: Option<String>,
}

impl ExperimentOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

pub fn file_stem(cfg: &ExperimentConfig) -> String {
    format!("{}-{}", cfg.experiment, cfg.hash())
}

/// Writes one CSV per table and a JSON manifest into `out_dir`; returns the
/// paths written, manifest last.
pub fn emit_results(cfg: &ExperimentConfig, output: &ExperimentOutput, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let stem = file_stem(cfg);
    let mut written = Vec::new();
    for t in &output.tables {
        let path = out_dir.join(format!("{stem}-{}.csv", t.name));
        fs::write(&path, t.to_csv()).map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
    }
    let files: Vec<String> = written
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    let manifest = json!({
        "experiment": cfg.experiment.name(),
        "config_hash": cfg.hash(),
        "config": cfg,
        "master_seed": cfg.seed,
        "runs": output.runs,
        "versions": {
            "spikelearn-harness": env!("CARGO_PKG_VERSION"),
        },
        "wall_time_scope": "simulation and learning loops only; pattern generation excluded",
        "wall_times_s": output.wall_times,
        "failure": output.failure,
        "files": files,
    });
    let path = out_dir.join(format!("{stem}-manifest.json"));
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| HarnessError::io(&path, e))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Experiment;

    fn output(tables: Vec<Table>) -> ExperimentOutput {
        ExperimentOutput {
            tables,
            runs: vec![RunRecord { index: 0, seed: 1 }],
            wall_times: json!({"total": 0.5}),
            failure: None,
        }
    }

    #[test]
    fn float_cells_round_trip() {
        for x in [0.0, 0.5, -3.25, 1e-13, 9.836575998178887e-14, 2.5e20, 1234.5678] {
            assert_eq!(fcell(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fcell(1e-13), "1e-13");
        assert_eq!(fcell(f64::INFINITY), "NA");
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new("empty", &["a", "b"]);
        assert_eq!(t.to_csv(), "a,b\n");
    }

    #[test]
    fn emit_writes_tables_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::preset(Experiment::Derivative);
        let mut t = Table::new("main", &["k", "x", "ok"]);
        t.push(crate::row![1usize, 0.5, true]);
        t.push(crate::row![2usize, f64::NAN, false]);
        let paths = emit_results(&cfg, &output(vec![t, Table::new("none", &["z"])]), dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        let main = fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(main, "k,x,ok\n1,0.5,true\n2,NA,false\n");
        assert_eq!(fs::read_to_string(&paths[1]).unwrap(), "z\n");
        let m: Value = serde_json::from_str(&fs::read_to_string(&paths[2]).unwrap()).unwrap();
        let echoed: ExperimentConfig = serde_json::from_value(m["config"].clone()).unwrap();
        assert_eq!(echoed, cfg);
        assert_eq!(m["config_hash"], cfg.hash());
        assert!(paths[0].file_name().unwrap().to_str().unwrap().starts_with(&format!("derivative-{}", cfg.hash())));
    }

    #[test]
    fn io_errors_carry_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let cfg = ExperimentConfig::preset(Experiment::Derivative);
        let err = emit_results(&cfg, &output(vec![]), &blocker.join("sub")).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }
}
