mod bench;

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use histif_core::dsl::parse_history;
use histif_core::io::{parse_modifications, parse_schemas, write_relation, DataDir};
use histif_core::{answer, Method, WhatIfParams};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] histif_core::Error),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("bench spec: {0}")]
    Spec(#[from] serde_json::Error),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 3,
        }
    }
}

/// Exit code when some solver call ran out of budget or time.
const EXIT_SOLVER_UNKNOWN: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "histif", version, about = "What-if queries over a history of updates")]
struct Cli {
    /// Data directory written by `load`.
    #[arg(long, global = true, env = "HISTIF_DATA_DIR", default_value = "histif-data")]
    data_dir: PathBuf,
    /// Log verbosity on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load schemas, base relations and a history into the data directory.
    Load {
        /// JSON schema object or array of them.
        #[arg(long)]
        schema: PathBuf,
        /// CSV files named after their relation (`Order.csv`), or `REL=FILE`.
        #[arg(long, num_args = 1..)]
        csv: Vec<String>,
        /// History in the update DSL, one statement per line.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Answer a what-if query over the stored history.
    Whatif(WhatIfArgs),
    /// Print a relation as of some version.
    Dump {
        relation: String,
        /// Version (number of executed statements); defaults to the last.
        #[arg(long)]
        at: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Run a benchmark spec and print one CSV row per cell and method.
    Bench {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `reps` of the spec.
        #[arg(long)]
        reps: Option<usize>,
        /// Overrides `seed` of the spec.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Serve the HTTP API over the data directory.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct Tuning {
    #[arg(long, value_enum)]
    slicer: Option<SlicerArg>,
    /// Compression groups per relation.
    #[arg(long)]
    groups: Option<usize>,
    /// Grouping attribute, `ATTR` or `REL.ATTR`.
    #[arg(long)]
    group_by: Option<String>,
    /// Lower bound for big-M constants.
    #[arg(long)]
    big_m: Option<i64>,
    /// Branch-and-bound nodes per solver call.
    #[arg(long)]
    solver_budget: Option<u64>,
    /// Wall-clock limit for all solver calls of a run.
    #[arg(long)]
    solver_timeout_ms: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SlicerArg {
    Dependency,
    Greedy,
}

impl Tuning {
    fn params(&self, method: Method) -> WhatIfParams {
        WhatIfParams {
            method,
            slicer: match self.slicer {
                Some(SlicerArg::Greedy) => histif_core::engine::Slicer::Greedy,
                _ => histif_core::engine::Slicer::Dependency,
            },
            groups: self.groups,
            group_by: self.group_by.clone(),
            big_m: self.big_m,
            solver_budget: self.solver_budget,
            solver_timeout_ms: self.solver_timeout_ms,
        }
    }
}

#[derive(Debug, Args)]
struct WhatIfArgs {
    /// JSON array of modifications.
    #[arg(long)]
    mods: PathBuf,
    /// History to use instead of the stored one.
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long, default_value = "r+ps+ds", value_parser = parse_method)]
    method: Method,
    #[command(flatten)]
    tuning: Tuning,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the delta here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the run report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Print the program slice and data-slicing conditions on stderr.
    #[arg(long)]
    dump_slices: bool,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: histif_core::Error| e.to_string())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|source| CliError::File {
            path: p.to_path_buf(),
            source,
        }),
        None => Ok(std::io::stdout().lock().write_all(text.as_bytes())?),
    }
}

fn load(dir: &DataDir, schema: &Path, csvs: &[String], history: Option<&Path>) -> Result<(), CliError> {
    let schemas = parse_schemas(&read(schema)?)?;
    for spec in csvs {
        let (rel, path) = match spec.split_once('=') {
            Some((r, p)) => (r.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(spec);
                let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
                (stem, p)
            }
        };
        let s = schemas
            .iter()
            .find(|s| s.name == rel)
            .ok_or_else(|| CliError::Usage(format!("no schema for relation `{rel}` ({})", path.display())))?;
        let n = dir
            .load_relation(s.clone(), &read(&path)?)
            .map_err(|e| histif_core::Error::Data(format!("{}: {e}", path.display())))?;
        tracing::info!(relation = %rel, rows = n, "loaded");
    }
    let known = dir.schemas()?;
    if let Some(missing) = schemas.iter().find(|s| !known.iter().any(|k| k.name == s.name)) {
        return Err(CliError::Usage(format!("no CSV given for relation `{}`", missing.name)));
    }
    let h = match history {
        Some(p) => parse_history(&read(p)?)?,
        None => dir.history()?,
    };
    let store = dir.open(Some(h.clone()))?;
    dir.save_history(&h)?;
    let versions = dir.save_snapshots(&store)?;
    tracing::info!(statements = h.len(), checkpoints = versions.len(), "history saved");
    Ok(())
}

fn whatif(dir: &DataDir, a: &WhatIfArgs) -> Result<bool, CliError> {
    let mods = parse_modifications(&read(&a.mods)?)?;
    let h = a.history.as_deref().map(|p| read(p).and_then(|t| Ok(parse_history(&t)?))).transpose()?;
    let store = dir.open(h)?;
    let opts = a.tuning.params(a.method).options(store.base())?;
    let ans = answer(&store, &mods, &opts)?;
    for d in &ans.report.degraded {
        tracing::warn!(optimization = %d.optimization, relation = ?d.relation, reason = %d.reason, "optimization skipped");
    }
    let text = match a.format {
        Format::Csv => ans.delta.to_csv()?,
        Format::Json => serde_json::to_string_pretty(&ans.delta.to_json())? + "\n",
    };
    emit(a.out.as_deref(), &text)?;
    if let Some(p) = &a.report {
        emit(Some(p), &(serde_json::to_string_pretty(&ans.report)? + "\n"))?;
    }
    if a.dump_slices {
        let mut err = std::io::stderr().lock();
        if let Some(s) = &ans.report.slice {
            writeln!(err, "slice kept {:?} removed {:?} ({} solver calls)", s.kept, s.removed, s.solver_calls)?;
        }
        if let Some(c) = &ans.report.data_slice {
            for (rel, cond) in &c.original {
                writeln!(err, "original {rel}: {cond}")?;
            }
            for (rel, cond) in &c.modified {
                writeln!(err, "modified {rel}: {cond}")?;
            }
        }
    }
    Ok(ans.report.solver_unknown)
}

fn dump(dir: &DataDir, rel: &str, at: Option<usize>, format: Format) -> Result<(), CliError> {
    let store = dir.open(None)?;
    let at = at.unwrap_or(store.len());
    if at > store.len() {
        return Err(CliError::Usage(format!("version {at} is beyond the {} stored statements", store.len())));
    }
    let db = store.reconstruct(at)?;
    let r = db.get(rel)?;
    let text = match format {
        Format::Csv => write_relation(r)?,
        Format::Json => {
            let rows: Vec<serde_json::Value> = r
                .iter()
                .map(|t| serde_json::Value::Array(t.iter().map(|v| v.to_json()).collect()))
                .collect();
            serde_json::to_string_pretty(&serde_json::json!({
                "relation": rel,
                "version": at,
                "attributes": r.schema.attributes,
                "rows": rows,
            }))? + "\n"
        }
    };
    emit(None, &text)
}

fn run_bench(spec: &Path, out: Option<&Path>, reps: Option<usize>, seed: Option<u64>, t: &Tuning) -> Result<(), CliError> {
    let mut spec: bench::BenchSpec = serde_json::from_str(&read(spec)?)?;
    if let Some(r) = reps {
        spec.reps = r;
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    let rows = bench::run(&spec, &t.params(Method::default()))?;
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(bench::HEADER)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    emit(out, &String::from_utf8_lossy(&bytes))
}

fn serve(dir: &DataDir, addr: SocketAddr) -> Result<(), CliError> {
    let state = Arc::new(histif_service::AppState::from_data_dir(dir)?);
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(histif_service::serve(addr, state))?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let dir = DataDir::new(&cli.data_dir);
    match &cli.cmd {
        Command::Load { schema, csv, history } => load(&dir, schema, csv, history.as_deref())?,
        Command::Whatif(a) => {
            if whatif(&dir, a)? {
                eprintln!("warning: solver budget exhausted; the slice is conservative");
                return Ok(ExitCode::from(EXIT_SOLVER_UNKNOWN));
            }
        }
        Command::Dump { relation, at, format } => dump(&dir, relation, *at, *format)?,
        Command::Bench {
            spec,
            out,
            reps,
            seed,
            tuning,
        } => run_bench(spec, out.as_deref(), *reps, *seed, tuning)?,
        Command::Serve { addr } => serve(&dir, *addr)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
