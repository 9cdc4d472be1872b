//! `wum`: access-log mining pipeline. Each subcommand wraps one library
//! stage; `pipeline` chains ingest, sessionize, vectorize and sweep from a
//! single TOML config.
//!
//! Exit codes: 0 success, 1 usage error, 2 input-data error, 3 internal
//! error.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flate2::bufread::GzDecoder;
use serde::Deserialize;

use wum_core::clustering::{
    dbscan_run, kmeans_run, kmedoids_run, leader_run, ClusterResult, ClusterResultJson,
    DbscanParams, KMeansParams, KMedoidsParams, LeaderParams,
};
use wum_core::harness::{
    best_of_seeds, default_k_max, emit_plot_data, emit_table, parse_table, run_sweep, AlgoKind,
    GridCell, RunRecord, SweepSpec, TableFormat,
};
use wum_core::logingest::{ingest, CleaningPolicy, IngestStats, LogEntry, LogFormat};
use wum_core::sessionize::{
    identify_users, session_length_distribution, sessionize, Session, SessionRecord,
    SessionizerConfig,
};
use wum_core::validity::{score, DiameterMode, ValidityReportJson};
use wum_core::vectorspace::{
    build_matrix, read_matrix_csv, write_matrix_csv, write_row_map, SessionMatrix, UrlIndex,
    WeightingMode,
};

#[derive(Parser)]
#[command(name = "wum", version, about = "Web usage mining over NCSA access logs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and clean access logs into an NDJSON entry stream
    Ingest(IngestArgs),
    /// Group cleaned entries into per-user sessions
    Sessionize(SessionizeArgs),
    /// Build the session-URL weight matrix from a session store
    Vectorize(VectorizeArgs),
    /// Run one clustering algorithm over a matrix
    Cluster(ClusterArgs),
    /// Score a clustering result with SSE, DB index and C-index
    Validate(ValidateArgs),
    /// Run a parameter sweep and emit the results table
    Sweep(SweepArgs),
    /// Project a sweep table into long-format plot data
    PlotData(PlotDataArgs),
    /// Run ingest, sessionize, vectorize and sweep from one config file
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Log file(s); .gz inputs are decompressed on the fly
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// TOML cleaning policy; defaults built in when omitted
    #[arg(long)]
    policy: Option<PathBuf>,
    /// common, combined or auto
    #[arg(long, default_value = "auto")]
    format: String,
    /// Output NDJSON file of cleaned entries
    #[arg(long)]
    out: PathBuf,
    /// Where to write the stats JSON; stdout when omitted
    #[arg(long)]
    stats_out: Option<PathBuf>,
}

#[derive(Args)]
struct SessionizeArgs {
    /// NDJSON entry stream from `ingest`
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 30)]
    timeout_min: i64,
    #[arg(long, default_value_t = 1)]
    min_hits: usize,
    /// Output NDJSON session store
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV of counts and the session-length distribution
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct VectorizeArgs {
    /// NDJSON session store from `sessionize`
    #[arg(long = "in")]
    input: PathBuf,
    /// binary, frequency, duration or bytes
    #[arg(long, default_value = "binary")]
    mode: String,
    /// Output matrix CSV (header row of URLs, one row per session)
    #[arg(long)]
    out: PathBuf,
    /// Sidecar JSON mapping matrix row to session id; <out>.rows.json when omitted
    #[arg(long)]
    row_map: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// kmeans, kmedoids, leader or dbscan
    #[arg(long)]
    algo: String,
    #[arg(long)]
    k: Option<usize>,
    /// Leader dissimilarity threshold, on squared distance
    #[arg(long)]
    alpha: Option<f64>,
    /// DBSCAN neighbourhood radius, on squared distance
    #[arg(long)]
    epsilon: Option<f64>,
    /// DBSCAN minimum neighbourhood size (the point itself counts)
    #[arg(long)]
    eta: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// Result JSON written by `cluster`
    #[arg(long)]
    result: PathBuf,
    /// mean_to_centroid or max_pairwise
    #[arg(long, default_value = "mean_to_centroid")]
    diameter: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    algo: String,
    /// k grid, e.g. 2..67 or 5; defaults to 2..ceil(m/3)
    #[arg(long)]
    k: Option<String>,
    /// alpha grid, e.g. 0.5..3.5:0.5
    #[arg(long)]
    alpha: Option<String>,
    /// epsilon grid, e.g. 0.5..3.5:0.5
    #[arg(long)]
    epsilon: Option<String>,
    /// eta grid, e.g. 2..10
    #[arg(long)]
    eta: Option<String>,
    /// Number of seeds; runs use seeds 0..N
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Keep only the minimum-J seed per grid cell
    #[arg(long)]
    best_of_seeds: bool,
    /// csv or json
    #[arg(long, default_value = "csv")]
    format: String,
    #[arg(long, default_value = "mean_to_centroid")]
    diameter: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotDataArgs {
    /// Sweep table CSV
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    x: String,
    #[arg(long)]
    y: String,
    #[arg(long)]
    series: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// TOML config with [ingest], [sessionize], [vectorize], [sweep] tables
    #[arg(long)]
    config: PathBuf,
}

/// Failure with its exit code class.
#[derive(Debug)]
enum Fail {
    Usage(String),
    Input(String),
    Internal(String),
}

impl Fail {
    fn code(&self) -> u8 {
        match self {
            Fail::Usage(_) => 1,
            Fail::Input(_) => 2,
            Fail::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Fail::Usage(m) | Fail::Input(m) | Fail::Internal(m) => m,
        }
    }
}

fn usage(msg: impl Into<String>) -> Fail {
    Fail::Usage(msg.into())
}

fn input_err(msg: impl Into<String>) -> Fail {
    Fail::Input(msg.into())
}

fn internal(msg: impl Into<String>) -> Fail {
    Fail::Internal(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Ingest(a) => cmd_ingest(a),
        Cmd::Sessionize(a) => cmd_sessionize(a),
        Cmd::Vectorize(a) => cmd_vectorize(a),
        Cmd::Cluster(a) => cmd_cluster(a),
        Cmd::Validate(a) => cmd_validate(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::PlotData(a) => cmd_plot_data(a),
        Cmd::Pipeline(a) => cmd_pipeline(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

// ---- shared I/O helpers ---------------------------------------------------

fn open_input(path: &Path) -> Result<Box<dyn BufRead>, Fail> {
    let file = File::open(path)
        .map_err(|e| input_err(format!("cannot open {}: {e}", path.display())))?;
    let buf = BufReader::new(file);
    if path.extension().is_some_and(|x| x == "gz") {
        Ok(Box::new(BufReader::new(GzDecoder::new(buf))))
    } else {
        Ok(Box::new(buf))
    }
}

fn create_output(path: &Path) -> Result<BufWriter<File>, Fail> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| internal(format!("cannot create {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Fail> {
    std::fs::write(path, text)
        .map_err(|e| internal(format!("cannot write {}: {e}", path.display())))
}

fn read_ndjson<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, Fail> {
    let reader = open_input(path)?;
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| input_err(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line)
            .map_err(|e| input_err(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

fn write_ndjson<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<(), Fail> {
    let mut w = create_output(path)?;
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| internal(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| internal(e.to_string()))?;
    }
    w.flush().map_err(|e| internal(e.to_string()))
}

fn load_matrix(path: &Path) -> Result<(SessionMatrix<f64>, UrlIndex), Fail> {
    let reader = open_input(path)?;
    read_matrix_csv::<f64, _>(reader)
        .map_err(|e| input_err(format!("{}: {e}", path.display())))
}

fn parse_format(s: &str) -> Result<LogFormat, Fail> {
    LogFormat::parse(s).ok_or_else(|| usage(format!("unknown log format {s:?}")))
}

fn parse_mode(s: &str) -> Result<WeightingMode, Fail> {
    WeightingMode::parse(s).ok_or_else(|| usage(format!("unknown weighting mode {s:?}")))
}

fn parse_algo(s: &str) -> Result<AlgoKind, Fail> {
    AlgoKind::parse(s).ok_or_else(|| usage(format!("unknown algorithm {s:?}")))
}

fn parse_diameter(s: &str) -> Result<DiameterMode, Fail> {
    match s {
        "mean_to_centroid" => Ok(DiameterMode::MeanToCentroid),
        "max_pairwise" => Ok(DiameterMode::MaxPairwise),
        _ => Err(usage(format!("unknown diameter mode {s:?}"))),
    }
}

fn load_policy(path: Option<&Path>) -> Result<CleaningPolicy, Fail> {
    match path {
        None => Ok(CleaningPolicy::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| input_err(format!("cannot read {}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| input_err(format!("{}: {e}", p.display())))
        }
    }
}

// ---- grid parsing ---------------------------------------------------------

/// Parse "2..10", "2..10:2" or a single "7" into an inclusive integer grid.
fn parse_usize_grid(s: &str) -> Result<Vec<usize>, Fail> {
    let bad = || usage(format!("malformed integer range {s:?}"));
    let (range, step) = match s.split_once(':') {
        Some((r, st)) => (r, st.parse::<usize>().map_err(|_| bad())?),
        None => (s, 1),
    };
    if step == 0 {
        return Err(bad());
    }
    match range.split_once("..") {
        None => Ok(vec![range.trim().parse().map_err(|_| bad())?]),
        Some((lo, hi)) => {
            let lo: usize = lo.trim().parse().map_err(|_| bad())?;
            let hi: usize = hi.trim().parse().map_err(|_| bad())?;
            if lo > hi {
                return Err(bad());
            }
            Ok((lo..=hi).step_by(step).collect())
        }
    }
}

/// Parse "0.5..3.5:0.5" or a single "1.5" into an inclusive float grid.
fn parse_f64_grid(s: &str) -> Result<Vec<f64>, Fail> {
    let bad = || usage(format!("malformed float range {s:?}"));
    let (range, step) = match s.split_once(':') {
        Some((r, st)) => (r, st.parse::<f64>().map_err(|_| bad())?),
        None => (s, 1.0),
    };
    if !(step > 0.0) {
        return Err(bad());
    }
    match range.split_once("..") {
        None => Ok(vec![range.trim().parse().map_err(|_| bad())?]),
        Some((lo, hi)) => {
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            if lo > hi {
                return Err(bad());
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| lo + step * i as f64).collect())
        }
    }
}

// ---- pipeline stages ------------------------------------------------------

fn stage_ingest(
    inputs: &[PathBuf],
    format: LogFormat,
    policy: &CleaningPolicy,
) -> Result<(Vec<LogEntry>, IngestStats), Fail> {
    let mut entries = Vec::new();
    let mut stats = IngestStats::default();
    for path in inputs {
        let reader = open_input(path)?;
        let (part, s) = ingest(reader, format, policy)
            .map_err(|e| input_err(format!("{}: {e}", path.display())))?;
        stats.lines_read += s.lines_read;
        stats.lines_malformed += s.lines_malformed;
        stats.entries_parsed += s.entries_parsed;
        stats.entries_after_cleaning += s.entries_after_cleaning;
        entries.extend(part);
    }
    stats.distinct_urls =
        entries.iter().map(|e| e.path.as_str()).collect::<BTreeSet<_>>().len();
    Ok((entries, stats))
}

fn stage_sessionize(entries: &[LogEntry], cfg: &SessionizerConfig) -> Vec<Session> {
    sessionize(entries, cfg)
}

/// Counts plus the session-length distribution as one long-format CSV.
fn session_stats_csv(entries: &[LogEntry], sessions: &[Session]) -> Result<String, Fail> {
    let mut out = String::from("stat,x,value\n");
    out.push_str(&format!("entries,,{}\n", entries.len()));
    out.push_str(&format!("users,,{}\n", identify_users(entries).len()));
    out.push_str(&format!("sessions,,{}\n", sessions.len()));
    let dist = session_length_distribution(sessions)
        .map_err(|e| input_err(e.to_string()))?;
    for (x, pct) in dist {
        out.push_str(&format!("pct_sessions_ge,{x},{pct}\n"));
    }
    Ok(out)
}

struct SweepParams {
    algo: AlgoKind,
    k: Option<String>,
    alpha: Option<String>,
    epsilon: Option<String>,
    eta: Option<String>,
    seeds: u64,
    repeats: usize,
    max_iter: usize,
    best_of_seeds: bool,
    format: TableFormat,
    diameter: DiameterMode,
}

fn build_grid(p: &SweepParams, m: usize) -> Result<Vec<GridCell>, Fail> {
    match p.algo {
        AlgoKind::KMeans | AlgoKind::KMedoids => {
            let ks = match &p.k {
                Some(s) => parse_usize_grid(s)?,
                None => (2..=default_k_max(m).max(2)).collect(),
            };
            Ok(ks.into_iter().map(GridCell::K).collect())
        }
        AlgoKind::Leader => {
            let s = p.alpha.as_ref().ok_or_else(|| usage("leader sweep needs --alpha"))?;
            Ok(parse_f64_grid(s)?.into_iter().map(GridCell::Alpha).collect())
        }
        AlgoKind::Dbscan => {
            let eps = p
                .epsilon
                .as_ref()
                .ok_or_else(|| usage("dbscan sweep needs --epsilon"))?;
            let eta = p.eta.as_ref().ok_or_else(|| usage("dbscan sweep needs --eta"))?;
            let eps = parse_f64_grid(eps)?;
            let etas = parse_usize_grid(eta)?;
            Ok(eps
                .into_iter()
                .flat_map(|e| etas.iter().map(move |&h| GridCell::Dbscan { epsilon: e, eta: h }))
                .collect())
        }
    }
}

fn stage_sweep(
    matrix: &SessionMatrix<f64>,
    p: &SweepParams,
) -> Result<(Vec<RunRecord>, String), Fail> {
    if p.seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    if p.repeats == 0 {
        return Err(usage("--repeats must be at least 1"));
    }
    let grid = build_grid(p, matrix.m())?;
    let mut spec = SweepSpec::new(p.algo, grid, (0..p.seeds).collect());
    spec.repeats = p.repeats;
    spec.max_iterations = p.max_iter;
    spec.diameter_mode = p.diameter;
    let mut records = run_sweep(matrix, &spec).map_err(|e| usage(e.to_string()))?;
    if p.best_of_seeds {
        records = best_of_seeds(&records);
    }
    let table = emit_table(&records, p.format).map_err(|e| input_err(e.to_string()))?;
    Ok((records, table))
}

fn sweep_metadata(p: &SweepParams, m: usize, rows: usize) -> serde_json::Value {
    serde_json::json!({
        "algo": p.algo.name(),
        "param_name": p.algo.param_name(),
        "matrix_rows": m,
        "seeds": p.seeds,
        "repeats": p.repeats,
        "max_iterations": p.max_iter,
        "aggregation": if p.best_of_seeds { "best_of_seeds_min_j" } else { "all_seeds" },
        "threshold_distance": "squared_euclidean",
        "index_distance": "euclidean_unsquared",
        "rows_emitted": rows,
    })
}

fn meta_path(out: &Path) -> PathBuf {
    PathBuf::from(format!("{}.meta.json", out.display()))
}

// ---- subcommands ----------------------------------------------------------

fn cmd_ingest(a: IngestArgs) -> Result<(), Fail> {
    let format = parse_format(&a.format)?;
    let policy = load_policy(a.policy.as_deref())?;
    let (entries, stats) = stage_ingest(&a.input, format, &policy)?;
    write_ndjson(&a.out, &entries)?;
    let stats_json =
        serde_json::to_string_pretty(&stats).map_err(|e| internal(e.to_string()))?;
    match &a.stats_out {
        Some(p) => write_text(p, &(stats_json + "\n"))?,
        None => println!("{stats_json}"),
    }
    Ok(())
}

fn sessionizer_config(timeout_min: i64, min_hits: usize) -> Result<SessionizerConfig, Fail> {
    if timeout_min <= 0 {
        return Err(usage("--timeout-min must be positive"));
    }
    Ok(SessionizerConfig { timeout: chrono::Duration::minutes(timeout_min), min_hits })
}

fn cmd_sessionize(a: SessionizeArgs) -> Result<(), Fail> {
    let cfg = sessionizer_config(a.timeout_min, a.min_hits)?;
    let entries: Vec<LogEntry> = read_ndjson(&a.input)?;
    let sessions = stage_sessionize(&entries, &cfg);
    let records: Vec<SessionRecord> = sessions.iter().map(SessionRecord::from).collect();
    write_ndjson(&a.out, &records)?;
    if let Some(stats_path) = &a.stats {
        write_text(stats_path, &session_stats_csv(&entries, &sessions)?)?;
    }
    Ok(())
}

fn cmd_vectorize(a: VectorizeArgs) -> Result<(), Fail> {
    let mode = parse_mode(&a.mode)?;
    let records: Vec<SessionRecord> = read_ndjson(&a.input)?;
    let sessions: Vec<Session> = records.into_iter().map(Session::from).collect();
    let (matrix, index) =
        build_matrix::<f64>(&sessions, mode).map_err(|e| input_err(e.to_string()))?;
    let out = create_output(&a.out)?;
    write_matrix_csv(&matrix, &index, out).map_err(|e| internal(e.to_string()))?;
    let row_map = a
        .row_map
        .unwrap_or_else(|| PathBuf::from(format!("{}.rows.json", a.out.display())));
    let sidecar = create_output(&row_map)?;
    write_row_map(&matrix, sidecar).map_err(|e| internal(e.to_string()))?;
    Ok(())
}

fn cmd_cluster(a: ClusterArgs) -> Result<(), Fail> {
    let algo = parse_algo(&a.algo)?;
    let (matrix, _) = load_matrix(&a.matrix)?;
    let need = |opt: Option<f64>, flag: &str| {
        opt.ok_or_else(|| usage(format!("{} requires {flag}", algo.name())))
    };
    let run: Result<ClusterResult<f64>, _> = match algo {
        AlgoKind::KMeans => {
            let k = a.k.ok_or_else(|| usage("kmeans requires --k"))?;
            let mut p = KMeansParams::new(k).with_seed(a.seed);
            p.max_iterations = a.max_iter;
            kmeans_run(&matrix, &p)
        }
        AlgoKind::KMedoids => {
            let k = a.k.ok_or_else(|| usage("kmedoids requires --k"))?;
            let mut p = KMedoidsParams::new(k).with_seed(a.seed);
            p.max_iterations = a.max_iter;
            kmedoids_run(&matrix, &p)
        }
        AlgoKind::Leader => {
            let alpha = need(a.alpha, "--alpha")?;
            leader_run(&matrix, &LeaderParams { alpha })
        }
        AlgoKind::Dbscan => {
            let epsilon = need(a.epsilon, "--epsilon")?;
            let eta = a.eta.ok_or_else(|| usage("dbscan requires --eta"))?;
            dbscan_run(&matrix, &DbscanParams { epsilon, eta })
        }
    };
    let result = run.map_err(|e| input_err(e.to_string()))?;
    let json = ClusterResultJson::from_result(algo.name(), &result);
    let text = serde_json::to_string_pretty(&json).map_err(|e| internal(e.to_string()))?;
    write_text(&a.out, &(text + "\n"))
}

fn cmd_validate(a: ValidateArgs) -> Result<(), Fail> {
    let diameter = parse_diameter(&a.diameter)?;
    let (matrix, _) = load_matrix(&a.matrix)?;
    let text = std::fs::read_to_string(&a.result)
        .map_err(|e| input_err(format!("cannot read {}: {e}", a.result.display())))?;
    let json: ClusterResultJson = serde_json::from_str(&text)
        .map_err(|e| input_err(format!("{}: {e}", a.result.display())))?;
    if json.labels.len() != matrix.m() {
        return Err(input_err(format!(
            "result has {} labels but matrix has {} rows",
            json.labels.len(),
            matrix.m()
        )));
    }
    let result: ClusterResult<f64> = json.into_result();
    let report = score(&matrix, &result, diameter);
    let out = ValidityReportJson::from_report(&report, diameter);
    let text = serde_json::to_string_pretty(&out).map_err(|e| internal(e.to_string()))?;
    write_text(&a.out, &(text + "\n"))
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Fail> {
    let params = SweepParams {
        algo: parse_algo(&a.algo)?,
        k: a.k,
        alpha: a.alpha,
        epsilon: a.epsilon,
        eta: a.eta,
        seeds: a.seeds,
        repeats: a.repeats,
        max_iter: a.max_iter,
        best_of_seeds: a.best_of_seeds,
        format: match a.format.as_str() {
            "csv" => TableFormat::Csv,
            "json" => TableFormat::Json,
            other => return Err(usage(format!("unknown table format {other:?}"))),
        },
        diameter: parse_diameter(&a.diameter)?,
    };
    let (matrix, _) = load_matrix(&a.matrix)?;
    let (records, table) = stage_sweep(&matrix, &params)?;
    write_text(&a.out, &table)?;
    let meta = sweep_metadata(&params, matrix.m(), records.len());
    write_text(
        &meta_path(&a.out),
        &(serde_json::to_string_pretty(&meta).map_err(|e| internal(e.to_string()))? + "\n"),
    )
}

fn cmd_plot_data(a: PlotDataArgs) -> Result<(), Fail> {
    let text = std::fs::read_to_string(&a.input)
        .map_err(|e| input_err(format!("cannot read {}: {e}", a.input.display())))?;
    let records = parse_table(&text).map_err(|e| input_err(e.to_string()))?;
    let csv = emit_plot_data(&records, &a.x, &a.y, &a.series)
        .map_err(|e| usage(e.to_string()))?;
    write_text(&a.out, &csv)
}

// ---- pipeline config ------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PipelineConfig {
    ingest: PipelineIngest,
    #[serde(default)]
    sessionize: PipelineSessionize,
    #[serde(default)]
    vectorize: PipelineVectorize,
    sweep: PipelineSweep,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PipelineIngest {
    input: Vec<PathBuf>,
    format: Option<String>,
    policy: Option<PathBuf>,
    out: Option<PathBuf>,
    stats_out: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PipelineSessionize {
    timeout_min: Option<i64>,
    min_hits: Option<usize>,
    out: Option<PathBuf>,
    stats: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PipelineVectorize {
    mode: Option<String>,
    out: Option<PathBuf>,
    row_map: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PipelineSweep {
    algo: String,
    k: Option<String>,
    alpha: Option<String>,
    epsilon: Option<String>,
    eta: Option<String>,
    seeds: Option<u64>,
    repeats: Option<usize>,
    max_iter: Option<usize>,
    best_of_seeds: Option<bool>,
    format: Option<String>,
    diameter: Option<String>,
    out: PathBuf,
}

fn cmd_pipeline(a: PipelineArgs) -> Result<(), Fail> {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| input_err(format!("cannot read {}: {e}", a.config.display())))?;
    let cfg: PipelineConfig =
        toml::from_str(&text).map_err(|e| input_err(format!("{}: {e}", a.config.display())))?;

    let format = parse_format(cfg.ingest.format.as_deref().unwrap_or("auto"))?;
    let policy = load_policy(cfg.ingest.policy.as_deref())?;
    let (entries, stats) = stage_ingest(&cfg.ingest.input, format, &policy)?;
    if let Some(out) = &cfg.ingest.out {
        write_ndjson(out, &entries)?;
    }
    if let Some(p) = &cfg.ingest.stats_out {
        let json = serde_json::to_string_pretty(&stats).map_err(|e| internal(e.to_string()))?;
        write_text(p, &(json + "\n"))?;
    }

    let scfg = sessionizer_config(
        cfg.sessionize.timeout_min.unwrap_or(30),
        cfg.sessionize.min_hits.unwrap_or(1),
    )?;
    let sessions = stage_sessionize(&entries, &scfg);
    if let Some(out) = &cfg.sessionize.out {
        let records: Vec<SessionRecord> = sessions.iter().map(SessionRecord::from).collect();
        write_ndjson(out, &records)?;
    }
    if let Some(p) = &cfg.sessionize.stats {
        write_text(p, &session_stats_csv(&entries, &sessions)?)?;
    }

    let mode = parse_mode(cfg.vectorize.mode.as_deref().unwrap_or("binary"))?;
    let (matrix, index) =
        build_matrix::<f64>(&sessions, mode).map_err(|e| input_err(e.to_string()))?;
    if let Some(out) = &cfg.vectorize.out {
        let w = create_output(out)?;
        write_matrix_csv(&matrix, &index, w).map_err(|e| internal(e.to_string()))?;
        let row_map = cfg
            .vectorize
            .row_map
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("{}.rows.json", out.display())));
        let sidecar = create_output(&row_map)?;
        write_row_map(&matrix, sidecar).map_err(|e| internal(e.to_string()))?;
    }

    let params = SweepParams {
        algo: parse_algo(&cfg.sweep.algo)?,
        k: cfg.sweep.k,
        alpha: cfg.sweep.alpha,
        epsilon: cfg.sweep.epsilon,
        eta: cfg.sweep.eta,
        seeds: cfg.sweep.seeds.unwrap_or(1),
        repeats: cfg.sweep.repeats.unwrap_or(1),
        max_iter: cfg.sweep.max_iter.unwrap_or(100),
        best_of_seeds: cfg.sweep.best_of_seeds.unwrap_or(false),
        format: match cfg.sweep.format.as_deref().unwrap_or("csv") {
            "csv" => TableFormat::Csv,
            "json" => TableFormat::Json,
            other => return Err(usage(format!("unknown table format {other:?}"))),
        },
        diameter: parse_diameter(cfg.sweep.diameter.as_deref().unwrap_or("mean_to_centroid"))?,
    };
    let (records, table) = stage_sweep(&matrix, &params)?;
    write_text(&cfg.sweep.out, &table)?;
    let meta = sweep_metadata(&params, matrix.m(), records.len());
    write_text(
        &meta_path(&cfg.sweep.out),
        &(serde_json::to_string_pretty(&meta).map_err(|e| internal(e.to_string()))? + "\n"),
    )
}
