//! Command-line front end: cloud file I/O, run configuration, and the
//! `register` and `evaluate` commands.
//!
//! Exit codes: 0 on success, 1 for usage, parse and I/O errors, 2 when
//! registration fails.

pub mod config;
pub mod io;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tcm_icp_core::eval::{run_experiment, DegradationKind, ExperimentConfig, Method, SceneParams};
use tcm_icp_core::register::Registration;
use tcm_icp_core::PointCloud;

use config::{ConfigError, RunConfig};
use io::{read_cloud, write_atomic, write_cloud, CloudFormat, IoError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid settings: {0}")]
    Settings(tcm_icp_core::Error),
    #[error("{0}")]
    Failed(tcm_icp_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => EXIT_FAILED,
            _ => EXIT_USAGE,
        }
    }
}

/// Registration failures are algorithmic; bad settings are usage errors.
fn classify(e: tcm_icp_core::Error) -> CliError {
    match e {
        tcm_icp_core::Error::InvalidConfig(_) => CliError::Settings(e),
        _ => CliError::Failed(e),
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: tcm_icp_core::Error| e.to_string())
}

fn parse_kind(s: &str) -> Result<DegradationKind, String> {
    s.parse().map_err(|e: tcm_icp_core::Error| e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "tcm-icp",
    version,
    about = "Multi-scan rigid point cloud registration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Register scans into one merged cloud.
    Register(RegisterArgs),
    /// Run a degradation sweep on synthetic scenes and write CSV metrics.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RegisterArgs {
    /// Input clouds (.xyz or .ply).
    #[arg(long, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Merged cloud; `.ply` writes binary PLY, anything else XYZ.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// CSV with one row-major rotation and translation per input.
    #[arg(long)]
    pub transforms: Option<PathBuf>,
    /// `key = value` settings file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// tcm-icp or icp.
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Comma-separated methods: tcm-icp, icp.
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "tcm-icp")]
    pub method: Vec<Method>,
    /// Comma-separated degradations: noise, occlusion, removal, isolated, blur.
    #[arg(long, value_delimiter = ',', value_parser = parse_kind,
          default_value = "noise,occlusion,removal,isolated,blur")]
    pub kinds: Vec<DegradationKind>,
    /// Comma-separated percentages.
    #[arg(long, value_delimiter = ',', default_value = "0,10,20,30")]
    pub levels: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    pub scans: usize,
    /// Points per synthetic scan.
    #[arg(long, default_value_t = 2000)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `key = value` settings file for the registration stages.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Record wall time per row. Off by default so output is reproducible.
    #[arg(long)]
    pub timing: bool,
}

impl Default for EvaluateArgs {
    fn default() -> Self {
        let cli = Cli::try_parse_from(["tcm-icp", "evaluate"]).expect("defaults parse");
        match cli.command {
            Command::Evaluate(a) => a,
            Command::Register(_) => unreachable!(),
        }
    }
}

/// Row-major rotation then translation for every input, in input order.
pub fn transforms_csv(reg: &Registration) -> String {
    let mut out = String::from("input,r00,r01,r02,r10,r11,r12,r20,r21,r22,t0,t1,t2\n");
    for (id, t) in &reg.transforms {
        out.push_str(id);
        for v in t.to_row_major() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

fn register(args: &RegisterArgs) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if !args.inputs.is_empty() {
        cfg.inputs = args.inputs.clone();
    }
    if let Some(p) = &args.output {
        cfg.output = Some(p.clone());
    }
    if let Some(p) = &args.transforms {
        cfg.transforms = Some(p.clone());
    }
    if let Some(m) = args.method {
        cfg.method = m;
    }
    if let Some(s) = args.seed {
        cfg.set_seed(s);
    }
    if cfg.inputs.len() < 2 {
        return Err(CliError::Usage(format!(
            "register needs at least 2 inputs, got {}",
            cfg.inputs.len()
        )));
    }
    let (Some(output), Some(transforms)) = (cfg.output.clone(), cfg.transforms.clone()) else {
        return Err(CliError::Usage(
            "register needs --output and --transforms".into(),
        ));
    };

    let clouds: Vec<PointCloud> = cfg
        .inputs
        .iter()
        .map(|p| read_cloud(p))
        .collect::<Result<_, _>>()?;
    let reg = cfg
        .method
        .register(&clouds, &cfg.register, &cfg.preprocess, cfg.graph_threshold)
        .map_err(classify)?;
    write_cloud(&reg.merged, &output, CloudFormat::from_path(&output))?;
    write_atomic(&transforms, transforms_csv(&reg).as_bytes())?;
    Ok(())
}

/// Runs the sweep and returns the CSV text.
pub fn evaluate_csv(args: &EvaluateArgs) -> Result<String, CliError> {
    let cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut exp = ExperimentConfig {
        methods: args.method.clone(),
        kinds: args.kinds.clone(),
        levels: args.levels.clone(),
        scene: SceneParams {
            n_scans: args.scans,
            points_per_scan: args.points,
            rng_seed: args.seed,
            ..Default::default()
        },
        register: cfg.register,
        preprocess: cfg.preprocess,
        graph_threshold: cfg.graph_threshold,
        metric_cap: cfg.metric_cap,
        measure_time: args.timing,
    };
    exp.register.rng_seed = args.seed;
    exp.preprocess.rng_seed = args.seed;
    let report = run_experiment(&exp).map_err(|e| match e {
        tcm_icp_core::Error::InvalidConfig(_) | tcm_icp_core::Error::TooFewPoints { .. } => {
            CliError::Settings(e)
        }
        other => CliError::Failed(other),
    })?;
    Ok(report.to_csv())
}

fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let csv = evaluate_csv(args)?;
    match &args.out {
        Some(path) => write_atomic(path, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn report(result: Result<(), CliError>) -> i32 {
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn cmd_register(args: &RegisterArgs) -> i32 {
    report(register(args))
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> i32 {
    report(evaluate(args))
}

/// Parses a full command line (program name first) and runs it.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match &cli.command {
        Command::Register(a) => cmd_register(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    }
}
