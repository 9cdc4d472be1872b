//! Parameter sweeps, timing and table/plot-data emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{
    dbscan_run, kmeans_run, kmedoids_run, leader_run, DbscanParams, KMeansParams, KMedoidsParams,
    LeaderParams,
};
use crate::scalar::Real;
use crate::validity::{score, DiameterMode};
use crate::vectorspace::SessionMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum HarnessError {
    #[error("input is empty")]
    EmptyInput,
    #[error("unknown field: {0}")]
    UnknownField(String),
    #[error("grid cell {cell} is not valid for algorithm {algo}")]
    InvalidSpec { algo: String, cell: String },
    #[error("malformed table: {0}")]
    MalformedTable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgoKind {
    KMeans,
    KMedoids,
    Leader,
    Dbscan,
}

impl AlgoKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "kmeans" => Some(Self::KMeans),
            "kmedoids" => Some(Self::KMedoids),
            "leader" => Some(Self::Leader),
            "dbscan" => Some(Self::Dbscan),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::KMeans => "kmeans",
            Self::KMedoids => "kmedoids",
            Self::Leader => "leader",
            Self::Dbscan => "dbscan",
        }
    }

    /// Parameter column name for this algorithm's sweep axis.
    pub fn param_name(self) -> &'static str {
        match self {
            Self::KMeans | Self::KMedoids => "k",
            Self::Leader => "alpha",
            Self::Dbscan => "epsilon",
        }
    }
}

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridCell {
    K(usize),
    Alpha(f64),
    Dbscan { epsilon: f64, eta: usize },
}

impl GridCell {
    fn fits(self, algo: AlgoKind) -> bool {
        matches!(
            (algo, self),
            (AlgoKind::KMeans | AlgoKind::KMedoids, GridCell::K(_))
                | (AlgoKind::Leader, GridCell::Alpha(_))
                | (AlgoKind::Dbscan, GridCell::Dbscan { .. })
        )
    }

    fn param_value(self) -> f64 {
        match self {
            GridCell::K(k) => k as f64,
            GridCell::Alpha(a) => a,
            GridCell::Dbscan { epsilon, .. } => epsilon,
        }
    }

    fn eta(self) -> Option<usize> {
        match self {
            GridCell::Dbscan { eta, .. } => Some(eta),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub algo: AlgoKind,
    pub grid: Vec<GridCell>,
    pub seeds: Vec<u64>,
    pub repeats: usize,
    pub max_iterations: usize,
    pub diameter_mode: DiameterMode,
}

impl SweepSpec {
    pub fn new(algo: AlgoKind, grid: Vec<GridCell>, seeds: Vec<u64>) -> Self {
        Self {
            algo,
            grid,
            seeds,
            repeats: 1,
            max_iterations: 100,
            diameter_mode: DiameterMode::default(),
        }
    }
}

/// Default upper bound for a k sweep: one third of the session count.
pub fn default_k_max(m: usize) -> usize {
    (m + 2) / 3
}

/// One row of a sweep table. Metric fields are `None` both for undefined
/// indices and for error rows (a failed run keeps its parameter columns and
/// leaves every metric empty).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algo: AlgoKind,
    pub param_name: String,
    pub param_value: f64,
    pub eta: Option<usize>,
    pub seed: u64,
    pub clusters: Option<usize>,
    pub empty_clusters: Option<usize>,
    pub noise: Option<usize>,
    pub sse_j: Option<f64>,
    pub db_index: Option<f64>,
    pub c_index: Option<f64>,
    pub elapsed_ms: f64,
}

const COLUMNS: [&str; 12] = [
    "algo",
    "param_name",
    "param_value",
    "eta",
    "seed",
    "clusters",
    "empty_clusters",
    "noise",
    "sse_j",
    "db_index",
    "c_index",
    "elapsed_ms",
];

/// Execute every grid cell × seed × repeat in deterministic grid-major
/// order. Per-cell failures become error rows; the sweep never aborts.
/// `elapsed_ms` times the clustering call only.
pub fn run_sweep<T: Real>(
    x: &SessionMatrix<T>,
    spec: &SweepSpec,
) -> Result<Vec<RunRecord>, HarnessError> {
    for cell in &spec.grid {
        if !cell.fits(spec.algo) {
            return Err(HarnessError::InvalidSpec {
                algo: spec.algo.name().to_string(),
                cell: format!("{cell:?}"),
            });
        }
    }
    let mut records = Vec::with_capacity(spec.grid.len() * spec.seeds.len() * spec.repeats);
    for &cell in &spec.grid {
        for &seed in &spec.seeds {
            for _ in 0..spec.repeats {
                records.push(run_cell(x, spec, cell, seed));
            }
        }
    }
    Ok(records)
}

fn run_cell<T: Real>(x: &SessionMatrix<T>, spec: &SweepSpec, cell: GridCell, seed: u64) -> RunRecord {
    let blank = RunRecord {
        algo: spec.algo,
        param_name: spec.algo.param_name().to_string(),
        param_value: cell.param_value(),
        eta: cell.eta(),
        seed,
        clusters: None,
        empty_clusters: None,
        noise: None,
        sse_j: None,
        db_index: None,
        c_index: None,
        elapsed_ms: 0.0,
    };
    let run = match (spec.algo, cell) {
        (AlgoKind::KMeans, GridCell::K(k)) => {
            let mut p = KMeansParams::new(k).with_seed(seed);
            p.max_iterations = spec.max_iterations;
            kmeans_run(x, &p)
        }
        (AlgoKind::KMedoids, GridCell::K(k)) => {
            let mut p = KMedoidsParams::new(k).with_seed(seed);
            p.max_iterations = spec.max_iterations;
            kmedoids_run(x, &p)
        }
        (AlgoKind::Leader, GridCell::Alpha(a)) => {
            leader_run(x, &LeaderParams { alpha: T::from_f64_lossy(a) })
        }
        (AlgoKind::Dbscan, GridCell::Dbscan { epsilon, eta }) => {
            dbscan_run(x, &DbscanParams { epsilon: T::from_f64_lossy(epsilon), eta })
        }
        _ => unreachable!("grid validated against algo"),
    };
    match run {
        Ok(r) => {
            let report = score(x, &r, spec.diameter_mode);
            RunRecord {
                clusters: Some(report.cluster_count),
                empty_clusters: Some(r.empty_cluster_count),
                noise: Some(r.noise_count),
                sse_j: Some(r.objective_j.as_f64()),
                db_index: report.db_index.map(Real::as_f64),
                c_index: report.c_index.map(Real::as_f64),
                elapsed_ms: r.elapsed.as_secs_f64() * 1000.0,
                ..blank
            }
        }
        Err(_) => blank,
    }
}

/// Keep, per grid cell, the seed with the minimum objective.
pub fn best_of_seeds(records: &[RunRecord]) -> Vec<RunRecord> {
    let mut best: BTreeMap<(String, u64, Option<usize>), RunRecord> = BTreeMap::new();
    let mut order: Vec<(String, u64, Option<usize>)> = Vec::new();
    for r in records {
        let key = (r.param_name.clone(), r.param_value.to_bits(), r.eta);
        match best.get(&key) {
            None => {
                order.push(key.clone());
                best.insert(key, r.clone());
            }
            Some(cur) => {
                let better = match (r.sse_j, cur.sse_j) {
                    (Some(a), Some(b)) => a < b,
                    (Some(_), None) => true,
                    _ => false,
                };
                if better {
                    best.insert(key, r.clone());
                }
            }
        }
    }
    order.into_iter().map(|k| best[&k].clone()).collect()
}

fn fmt_opt<D: std::fmt::Display>(v: &Option<D>) -> String {
    v.as_ref().map_or_else(String::new, D::to_string)
}

/// Serialize records as CSV (fixed column order, empty cells for undefined
/// values) or as a JSON array (null for undefined values).
pub fn emit_table(records: &[RunRecord], format: TableFormat) -> Result<String, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    match format {
        TableFormat::Json => {
            Ok(serde_json::to_string_pretty(records).expect("record serialization"))
        }
        TableFormat::Csv => {
            let mut out = String::new();
            writeln!(out, "{}", COLUMNS.join(",")).unwrap();
            for r in records {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    r.algo.name(),
                    r.param_name,
                    r.param_value,
                    fmt_opt(&r.eta),
                    r.seed,
                    fmt_opt(&r.clusters),
                    fmt_opt(&r.empty_clusters),
                    fmt_opt(&r.noise),
                    fmt_opt(&r.sse_j),
                    fmt_opt(&r.db_index),
                    fmt_opt(&r.c_index),
                    r.elapsed_ms,
                )
                .unwrap();
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

fn parse_opt<V: std::str::FromStr>(cell: &str, what: &str) -> Result<Option<V>, HarnessError> {
    if cell.is_empty() {
        Ok(None)
    } else {
        cell.parse()
            .map(Some)
            .map_err(|_| HarnessError::MalformedTable(format!("bad {what}: {cell:?}")))
    }
}

/// Parse a CSV document produced by [`emit_table`].
pub fn parse_table(csv_text: &str) -> Result<Vec<RunRecord>, HarnessError> {
    let mut lines = csv_text.lines();
    let header = lines.next().ok_or(HarnessError::EmptyInput)?;
    if header != COLUMNS.join(",") {
        return Err(HarnessError::MalformedTable(format!("unexpected header {header:?}")));
    }
    let mut records = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != COLUMNS.len() {
            return Err(HarnessError::MalformedTable(format!("bad row {line:?}")));
        }
        records.push(RunRecord {
            algo: AlgoKind::parse(cells[0])
                .ok_or_else(|| HarnessError::MalformedTable(format!("bad algo {:?}", cells[0])))?,
            param_name: cells[1].to_string(),
            param_value: cells[2]
                .parse()
                .map_err(|_| HarnessError::MalformedTable(format!("bad param {:?}", cells[2])))?,
            eta: parse_opt(cells[3], "eta")?,
            seed: cells[4]
                .parse()
                .map_err(|_| HarnessError::MalformedTable(format!("bad seed {:?}", cells[4])))?,
            clusters: parse_opt(cells[5], "clusters")?,
            empty_clusters: parse_opt(cells[6], "empty_clusters")?,
            noise: parse_opt(cells[7], "noise")?,
            sse_j: parse_opt(cells[8], "sse_j")?,
            db_index: parse_opt(cells[9], "db_index")?,
            c_index: parse_opt(cells[10], "c_index")?,
            elapsed_ms: cells[11]
                .parse()
                .map_err(|_| HarnessError::MalformedTable(format!("bad elapsed {:?}", cells[11])))?,
        });
    }
    Ok(records)
}

fn field_value(r: &RunRecord, field: &str) -> Result<Option<String>, HarnessError> {
    let num = |v: Option<f64>| Ok(v.map(|x| x.to_string()));
    match field {
        "algo" => Ok(Some(r.algo.name().to_string())),
        "param_name" => Ok(Some(r.param_name.clone())),
        "param_value" => Ok(Some(r.param_value.to_string())),
        // sweep-axis aliases resolve through param_value
        "k" | "alpha" | "epsilon" => {
            if r.param_name == field {
                Ok(Some(r.param_value.to_string()))
            } else {
                Ok(None)
            }
        }
        "eta" => Ok(r.eta.map(|v| v.to_string())),
        "seed" => Ok(Some(r.seed.to_string())),
        "clusters" | "cluster_count" => Ok(r.clusters.map(|v| v.to_string())),
        "empty_clusters" => Ok(r.empty_clusters.map(|v| v.to_string())),
        "noise" | "noise_count" => Ok(r.noise.map(|v| v.to_string())),
        "sse_j" | "sse" | "objective_j" => num(r.sse_j),
        "db_index" => num(r.db_index),
        "c_index" => num(r.c_index),
        "elapsed_ms" => Ok(Some(r.elapsed_ms.to_string())),
        _ => Err(HarnessError::UnknownField(field.to_string())),
    }
}

/// Project records into long-format plot data: CSV `series,x,y` sorted by
/// (series, x). Rows lacking the x or series field are dropped; a missing y
/// serializes as an empty cell.
pub fn emit_plot_data(
    records: &[RunRecord],
    x_field: &str,
    y_field: &str,
    series_field: &str,
) -> Result<String, HarnessError> {
    let mut rows: Vec<(String, f64, String)> = Vec::new();
    for r in records {
        let x = field_value(r, x_field)?;
        let y = field_value(r, y_field)?;
        let series = field_value(r, series_field)?;
        if let (Some(x), Some(series)) = (x, series) {
            let xv: f64 = x
                .parse()
                .map_err(|_| HarnessError::MalformedTable(format!("non-numeric x {x:?}")))?;
            rows.push((series, xv, y.unwrap_or_default()));
        }
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.partial_cmp(&b.1).unwrap()));
    let mut out = String::from("series,x,y\n");
    for (series, x, y) in rows {
        writeln!(out, "{series},{x},{y}").unwrap();
    }
    Ok(out)
}
