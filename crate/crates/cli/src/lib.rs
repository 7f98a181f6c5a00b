//! `pivnet` command-line pipeline: data generation, preparation, training,
//! evaluation and the proximity applications.
//!
//! Every option may also come from a `key = value` file passed with
//! `--config`; flags given on the command line override the file.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

mod commands;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "pivnet", version, about = "k-NN distance estimation with pivot grids")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Generate a synthetic dataset into --data.
    Gen,
    /// Partition --data, build the kd-tree and pivot grid, compute ground truth.
    Prep,
    /// Train the estimator chosen by --kind.
    Train,
    /// Error report of --estimator on the test queries.
    Eval,
    /// Density grid with contour bins over the reference set.
    Density,
    /// Distance-based outlier detection, exact versus --estimator.
    Dod,
    /// Threshold-seeded k-NN search and its recall.
    Aknn,
    /// Density-peaks clustering of --data.
    Dpc,
    /// Per-query latency of every available estimator and the kd-tree.
    Bench,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Prep => "prep",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Density => "density",
            Command::Dod => "dod",
            Command::Aknn => "aknn",
            Command::Dpc => "dpc",
            Command::Bench => "bench",
        }
    }
}

#[derive(clap::Args, Debug, Clone, Serialize)]
pub struct Opts {
    /// key = value file with default options.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Artifact directory shared by the pipeline commands.
    #[arg(long, global = true, default_value = "run")]
    pub dir: PathBuf,
    /// Dataset CSV (written by gen, read by prep and dpc).
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Machine-readable report on stdout.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub json: bool,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true, default_value_t = 0)]
    #[serde(skip)]
    pub threads: usize,

    /// gen: mixture, walk or uniform.
    #[arg(long, global = true, default_value = "mixture")]
    pub generator: String,
    #[arg(long, global = true, default_value_t = 61_000)]
    pub n: usize,
    #[arg(long, global = true, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, global = true, default_value_t = 8)]
    pub clusters: usize,
    #[arg(long, global = true, default_value_t = 0.0)]
    pub box_lo: f64,
    #[arg(long, global = true, default_value_t = 100.0)]
    pub box_hi: f64,
    #[arg(long, global = true, default_value_t = 2.0)]
    pub std_lo: f64,
    #[arg(long, global = true, default_value_t = 8.0)]
    pub std_hi: f64,
    /// Random-walk step standard deviation.
    #[arg(long, global = true, default_value_t = 20.0)]
    pub step: f64,
    /// Planted outliers, drawn from the box widened by half its width.
    #[arg(long, global = true, default_value_t = 0)]
    pub outliers: usize,
    /// Minimum distance of a planted outlier to the generated points.
    #[arg(long, global = true, default_value_t = 15.0)]
    pub outlier_gap: f64,

    /// prep: sampled training queries.
    #[arg(long, global = true, default_value_t = 10_000)]
    pub n_train: usize,
    /// prep: sampled test queries.
    #[arg(long, global = true, default_value_t = 1_000)]
    pub n_test: usize,
    /// prep: uniform training queries, defaults to --n-train.
    #[arg(long, global = true)]
    pub n_augment: Option<usize>,
    /// prep: uniform test queries, defaults to --n-test.
    #[arg(long, global = true)]
    pub test_augment: Option<usize>,
    /// Grid cells per dimension.
    #[arg(long, global = true, default_value_t = 256)]
    pub cells: usize,
    #[arg(long, global = true, default_value_t = 50)]
    pub k_max: usize,
    /// Pivot grid memory budget in MiB.
    #[arg(long, global = true, default_value_t = 4096)]
    pub budget_mb: u64,

    /// train: querynet, pivnet or pivnet-itr.
    #[arg(long, global = true, default_value = "pivnet")]
    pub kind: String,
    /// Hidden layer widths, comma separated.
    #[arg(long, global = true, default_value = "128,128,32")]
    pub hidden: String,
    #[arg(long, global = true, default_value_t = 0.2)]
    pub lr: f64,
    #[arg(long, global = true, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, global = true, default_value_t = 0.98)]
    pub lr_decay: f64,
    #[arg(long, global = true, default_value_t = 5)]
    pub warmup: usize,
    #[arg(long, global = true, default_value_t = 500)]
    pub batch: usize,
    #[arg(long, global = true, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, global = true, default_value_t = 10)]
    pub patience: usize,

    /// exact, pivot, querynet, pivnet or pivnet-itr.
    #[arg(long, global = true, default_value = "pivnet")]
    pub estimator: String,
    /// Force estimated vectors to be non-decreasing in k.
    #[arg(long, global = true)]
    pub isotonic: bool,

    #[arg(long, global = true, default_value_t = 50)]
    pub k: usize,
    /// aknn: comma-separated k values.
    #[arg(long, global = true, default_value = "25,50")]
    pub ks: String,
    /// aknn: number of sampled test queries, all when omitted.
    #[arg(long, global = true)]
    pub queries: Option<usize>,
    /// aknn: also time exact and seeded search.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub timing: bool,
    #[arg(long, global = true, default_value_t = 200)]
    pub width: usize,
    #[arg(long, global = true, default_value_t = 200)]
    pub height: usize,
    /// dod: outlier count N; the radius variant uses the matching r.
    #[arg(long, global = true, default_value_t = 100)]
    pub top_n: usize,
    #[arg(long, global = true, default_value_t = 200.0)]
    pub d_cut: f64,
    #[arg(long, global = true, default_value_t = 50)]
    pub rho_min: usize,
    #[arg(long, global = true, default_value_t = 5000.0)]
    pub delta_min: f64,
    /// dpc: recover d_cut from the noise count with --estimator and recluster.
    #[arg(long, global = true)]
    pub reverse: bool,
    #[arg(long, global = true, default_value_t = 1000)]
    pub iters: usize,
}

impl Opts {
    /// Effective options as sorted `key=value` lines.
    pub fn echo(&self, command: Command) -> String {
        let value = serde_json::to_value(self).expect("options serialize");
        let mut out = format!("command={}\n", command.name());
        if let serde_json::Value::Object(map) = value {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for key in keys {
                let v = match &map[key] {
                    serde_json::Value::String(s) => s.clone(),
                    serde_json::Value::Null => String::new(),
                    other => other.to_string(),
                };
                out.push_str(&format!("{}={v}\n", key.replace('_', "-")));
            }
        }
        out
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError { code: EXIT_VALIDATION, message: message.into() }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        CliError { code: EXIT_IO, message: format!("{}: {err}", path.display()) }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<pivnet::Error> for CliError {
    fn from(e: pivnet::Error) -> Self {
        use pivnet::Error as E;
        let code = match &e {
            E::Io { .. } | E::Format(_) | E::Checksum { .. } => EXIT_IO,
            E::MemoryBudget { .. } => EXIT_BUDGET,
            E::Diverged { .. } => EXIT_FAILURE,
            _ => EXIT_VALIDATION,
        };
        CliError { code, message: e.to_string() }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Turns a `key = value` file into flags. `true` becomes a bare flag and
/// `false` drops the key.
pub fn config_args(text: &str) -> CliResult<Vec<OsString>> {
    let mut args = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::validation(format!("config line {}: expected key = value", no + 1)))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(CliError::validation(format!("config line {}: bad key", no + 1)));
        }
        match value.trim() {
            "true" => args.push(format!("--{key}").into()),
            "false" => {}
            v => {
                args.push(format!("--{key}").into());
                args.push(v.into());
            }
        }
    }
    Ok(args)
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Parses arguments, with the config file's flags placed before the user's.
pub fn parse_args<I, T>(args: I) -> Result<Cli, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let mut args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    if let Some(path) = config_path(&args) {
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let extra = config_args(&text)?;
        let at = 1.min(args.len());
        args.splice(at..at, extra);
    }
    Cli::try_parse_from(args).map_err(|e| {
        let code = match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
            _ => EXIT_VALIDATION,
        };
        CliError { code, message: e.render().to_string() }
    })
}

/// Runs a command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let cli = match parse_args(args) {
        Ok(cli) => cli,
        Err(e) if e.code == EXIT_OK => {
            print!("{e}");
            return EXIT_OK;
        }
        Err(e) => {
            eprint!("{e}");
            return e.code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.opts.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_FAILURE;
        }
    };
    match pool.install(|| commands::dispatch(&cli)) {
        Ok(report) => {
            if cli.opts.json {
                println!("{}", serde_json::to_string_pretty(&report.json).expect("json report"));
            } else {
                print!("{}", report.text);
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

/// What a command prints: a text rendering and a JSON value.
pub struct Report {
    pub text: String,
    pub json: serde_json::Value,
}
