//! Command implementations behind the `syncbt` binary.
//!
//! Each command returns a process exit code:
//!
//! | code | meaning                                             |
//! |------|-----------------------------------------------------|
//! | 0    | success (`run`: root returned Success)              |
//! | 1    | `run`: root returned Failure; `check`: errors found |
//! | 2    | `run`: episode truncated at `max_ticks`             |
//! | 64   | parse, validation or configuration error            |
//! | 66   | input unreadable or output not writable             |

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use syncbt::dsl::{parse_tree, print_tree, validate_semantics, Diagnostic, Severity, TreeDocument};
use syncbt::harness::{run_sweep, SweepResult, DEFAULT_DT, DEFAULT_MAX_TICKS};
use syncbt::{run_episode, NodeStatus, Trace64};

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_TRUNCATED: i32 = 2;
pub const EXIT_DATA_ERR: i32 = 64;
pub const EXIT_IO_ERR: i32 = 66;

/// Column order of the `run` trace CSV.
pub const TRACE_HEADER: [&str; 6] = ["k", "t", "child_id", "progress", "status", "ticked"];
/// Column order of the sweep `raw.csv`.
pub const RAW_HEADER: [&str; 5] = ["point", "trial", "seed", "value", "truncated"];

pub const SUMMARY_FILE: &str = "summary.json";
pub const RAW_FILE: &str = "raw.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "syncbt", version, about = "Behavior trees with progress-synchronized parallel nodes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one seeded episode and print its trace.
    Run(RunArgs),
    /// Run the `[experiment]` sweep of a file and write a result bundle.
    Sweep(SweepArgs),
    /// Parse and validate a tree file.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    pub tree_file: PathBuf,
    #[arg(long, env = "SYNCBT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Time step; defaults to the file's `[experiment]` value, else 1.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub max_ticks: Option<u64>,
    /// Write the trace here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    pub config_file: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Override the number of trials per point.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Override the base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    pub tree_file: PathBuf,
}

pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match &cli.command {
        Command::Run(args) => cmd_run(args, out, err),
        Command::Sweep(args) => cmd_sweep(args, out, err),
        Command::Check(args) => cmd_check(args, out, err),
    }
}

/// Reads and parses a tree file, reporting failures on `err`.
fn load(path: &Path, err: &mut dyn Write) -> Result<TreeDocument<f64>, i32> {
    let text = fs::read_to_string(path).map_err(|e| {
        let _ = writeln!(err, "{}: {e}", path.display());
        EXIT_IO_ERR
    })?;
    parse_tree(&text).map_err(|e| {
        let _ = writeln!(err, "{}:{e}", path.display());
        EXIT_DATA_ERR
    })
}

/// Prints diagnostics; returns whether any is an error.
fn report(path: &Path, diagnostics: &[Diagnostic], sink: &mut dyn Write) -> bool {
    for d in diagnostics {
        let _ = writeln!(sink, "{}:{d}", path.display());
    }
    diagnostics.iter().any(|d| d.severity == Severity::Error)
}

pub fn cmd_check(args: &CheckArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let doc = match load(&args.tree_file, err) {
        Ok(doc) => doc,
        Err(code) => return code,
    };
    if report(&args.tree_file, &validate_semantics(&doc), out) {
        EXIT_FAILURE
    } else {
        EXIT_SUCCESS
    }
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let doc = match load(&args.tree_file, err) {
        Ok(doc) => doc,
        Err(code) => return code,
    };
    if report(&args.tree_file, &validate_semantics(&doc), err) {
        return EXIT_DATA_ERR;
    }
    let exp = doc.experiment.as_ref();
    let dt = args.dt.or(exp.map(|e| e.dt)).unwrap_or(DEFAULT_DT);
    let max_ticks = args
        .max_ticks
        .or(exp.map(|e| e.max_ticks))
        .unwrap_or(DEFAULT_MAX_TICKS);
    let trace = match run_episode(&doc.root, dt, max_ticks, args.seed) {
        Ok(trace) => trace,
        Err(e) => {
            let _ = writeln!(err, "{}: {e}", args.tree_file.display());
            return EXIT_DATA_ERR;
        }
    };
    let bytes = match args.format {
        Format::Csv => trace_csv(&trace),
        Format::Json => json_bytes(&trace),
    };
    let written = match &args.out {
        Some(path) => fs::write(path, &bytes).map_err(|e| (path.display().to_string(), e)),
        None => out.write_all(&bytes).map_err(|e| ("stdout".to_string(), e)),
    };
    if let Err((target, e)) = written {
        let _ = writeln!(err, "{target}: {e}");
        return EXIT_IO_ERR;
    }
    if trace.truncated {
        return EXIT_TRUNCATED;
    }
    match trace.final_status() {
        Some(NodeStatus::Failure) => EXIT_FAILURE,
        _ => EXIT_SUCCESS,
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    bytes
}

/// One row per leaf per tick, leaves in preorder.
pub fn trace_csv(trace: &Trace64) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_HEADER).expect("in-memory write");
    for e in &trace.entries {
        for (c, channel) in trace.channels.iter().enumerate() {
            w.write_record([
                e.k.to_string(),
                e.t.to_string(),
                channel.name.clone(),
                e.progress[c].map(|p| p.to_string()).unwrap_or_default(),
                e.status[c].map(|s| s.as_str().to_string()).unwrap_or_default(),
                u8::from(e.ticked[c]).to_string(),
            ])
            .expect("in-memory write");
        }
    }
    w.into_inner().expect("in-memory flush")
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    point: String,
    params: BTreeMap<String, f64>,
    min: f64,
    q1: f64,
    median: f64,
    q3: f64,
    max: f64,
    n: usize,
    truncated: usize,
}

#[derive(Debug, Serialize)]
struct Summary {
    metric: &'static str,
    points: Vec<SummaryRow>,
}

#[derive(Debug, Serialize)]
struct ManifestPoint {
    point: String,
    seeds: Vec<u64>,
}

#[derive(Debug, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    timestamp: u64,
    config_file: String,
    /// Canonical text of the configuration actually run, overrides applied.
    config: String,
    base_seed: u64,
    trials: usize,
    seed_rule: &'static str,
    points: Vec<ManifestPoint>,
}

/// The files of a sweep bundle, in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    pub summary: Vec<u8>,
    pub raw: Vec<u8>,
    pub manifest: Vec<u8>,
}

pub fn build_bundle(
    doc: &TreeDocument<f64>,
    config_file: &str,
    result: &SweepResult<f64>,
    timestamp: u64,
) -> Bundle {
    let exp = doc.experiment.as_ref().expect("sweep document has an experiment");
    let summary = Summary {
        metric: result.metric,
        points: result
            .points
            .iter()
            .map(|p| SummaryRow {
                point: p.point.key(),
                params: p.point.params.iter().map(|(path, v)| (path.to_string(), *v)).collect(),
                min: p.summary.min,
                q1: p.summary.q1,
                median: p.summary.median,
                q3: p.summary.q3,
                max: p.summary.max,
                n: p.summary.n,
                truncated: p.outcomes.iter().filter(|o| o.truncated).count(),
            })
            .collect(),
    };

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RAW_HEADER).expect("in-memory write");
    for p in &result.points {
        let key = p.point.key();
        for o in &p.outcomes {
            w.write_record([
                key.clone(),
                o.trial.to_string(),
                o.seed.to_string(),
                o.value.to_string(),
                o.truncated.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    let raw = w.into_inner().expect("in-memory flush");

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        timestamp,
        config_file: config_file.to_string(),
        config: print_tree(doc),
        base_seed: exp.base_seed,
        trials: exp.trials,
        seed_rule: "derive_seed(base_seed, point, trial)",
        points: result
            .points
            .iter()
            .map(|p| ManifestPoint {
                point: p.point.key(),
                seeds: p.outcomes.iter().map(|o| o.seed).collect(),
            })
            .collect(),
    };

    Bundle {
        summary: json_bytes(&summary),
        raw,
        manifest: json_bytes(&manifest),
    }
}

/// Parses a sweep file and applies command-line overrides.
pub fn load_sweep(args: &SweepArgs, err: &mut dyn Write) -> Result<TreeDocument<f64>, i32> {
    let mut doc = load(&args.config_file, err)?;
    if report(&args.config_file, &validate_semantics(&doc), err) {
        return Err(EXIT_DATA_ERR);
    }
    let Some(exp) = doc.experiment.as_mut() else {
        let _ = writeln!(err, "{}: no [experiment] section", args.config_file.display());
        return Err(EXIT_DATA_ERR);
    };
    if let Some(trials) = args.trials {
        exp.trials = trials;
    }
    if let Some(seed) = args.seed {
        exp.base_seed = seed;
    }
    Ok(doc)
}

fn sweep_bundle(args: &SweepArgs, err: &mut dyn Write) -> Result<Bundle, i32> {
    let doc = load_sweep(args, err)?;
    let config = doc.experiment_config().expect("checked above");
    let run = || run_sweep(&config);
    let result = match args.jobs {
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| {
                    let _ = writeln!(err, "--jobs {jobs}: {e}");
                    EXIT_DATA_ERR
                })?;
            pool.install(run)
        }
        None => run(),
    };
    let result = result.map_err(|e| {
        let _ = writeln!(err, "{}: {e}", args.config_file.display());
        EXIT_DATA_ERR
    })?;
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(build_bundle(
        &doc,
        &args.config_file.display().to_string(),
        &result,
        timestamp,
    ))
}

fn write_bundle(dir: &Path, bundle: &Bundle) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(SUMMARY_FILE), &bundle.summary)?;
    fs::write(dir.join(RAW_FILE), &bundle.raw)?;
    fs::write(dir.join(MANIFEST_FILE), &bundle.manifest)
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let bundle = match sweep_bundle(args, err) {
        Ok(bundle) => bundle,
        Err(code) => return code,
    };
    if let Err(e) = write_bundle(&args.out, &bundle) {
        let _ = writeln!(err, "{}: {e}", args.out.display());
        return EXIT_IO_ERR;
    }
    let _ = writeln!(out, "wrote {}", args.out.display());
    EXIT_SUCCESS
}
