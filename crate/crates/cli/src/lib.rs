//! Command-line front end: `simulate`, `identify`, `sweep` and `report`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical divergence,
//! 4 I/O or dataset error.

mod commands;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::error;
use thiserror::Error;

use osmoid::config::{ConfigError, DatasetConfig, RunConfig};
use osmoid::dataio::{read_manifest, DataError};
use osmoid::{IdentifyError, IntegrateError, LawVariant, PlantError};

pub use commands::{identify, report, simulate, sweep, SweepSummary};

/// Environment variable holding the default output root.
pub const OUT_DIR_ENV: &str = "OSMOID_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "runs";

#[derive(Debug, Parser)]
#[command(name = "osmoid", version, about = "Adaptive-observer identification of osmotic-shock responses")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration (TOML), or a manifest.toml to replay.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Built-in configuration used when --config is absent.
    #[arg(long, global = true, value_name = "NAME")]
    pub preset: Option<String>,
    /// Output root; run directories are created below it.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = DEFAULT_OUT_DIR, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Integration step in minutes.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub law_variant: Option<LawVariantArg>,
    /// Parallel sweep children (defaults to the number of CPUs).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Write SVG plots next to each trace.
    #[arg(long, global = true, overrides_with = "no_plot")]
    pub plot: bool,
    #[arg(long, global = true, overrides_with = "plot")]
    pub no_plot: bool,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum LawVariantArg {
    PaperLiteral,
    LyapunovCorrected,
}

impl From<LawVariantArg> for LawVariant {
    fn from(v: LawVariantArg) -> Self {
        match v {
            LawVariantArg::PaperLiteral => LawVariant::PaperLiteral,
            LawVariantArg::LyapunovCorrected => LawVariant::LyapunovCorrected,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the configured plant under its stimulus.
    Simulate,
    /// Run the configured estimator against a plant or dataset.
    Identify {
        /// Measured `t,u,y` CSV; replaces any plant in the configuration.
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
    },
    /// Repeat the run over the configured periods and gain scales.
    Sweep,
    /// Plot the runs found in a run or sweep directory.
    Report {
        #[arg(value_name = "DIR")]
        dir: PathBuf,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("numerical divergence: {0}")]
    Diverged(IntegrateError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("dataset: {0}")]
    Dataset(IdentifyError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{failed} of {total} sweep runs failed")]
    SweepFailed { failed: usize, total: usize, code: i32 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::Data(_) | CliError::Dataset(_) | CliError::Io { .. } => 4,
            CliError::SweepFailed { code, .. } => *code,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<IntegrateError> for CliError {
    fn from(e: IntegrateError) -> Self {
        match e {
            IntegrateError::InvalidGrid(_) => CliError::Config(e.into()),
            IntegrateError::Diverged { .. } => CliError::Diverged(e),
        }
    }
}

impl From<PlantError> for CliError {
    fn from(e: PlantError) -> Self {
        CliError::Config(e.into())
    }
}

impl From<IdentifyError> for CliError {
    fn from(e: IdentifyError) -> Self {
        match e {
            IdentifyError::Integrate(e) => e.into(),
            IdentifyError::Plant(e) => e.into(),
            IdentifyError::NonFiniteInitial => CliError::Usage(e.to_string()),
            other => CliError::Dataset(other),
        }
    }
}

/// Flag values that override the configuration file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub law_variant: Option<LawVariant>,
    pub plot: Option<bool>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(dt) = self.dt {
            cfg.grid.dt = dt;
        }
        if let Some(v) = self.law_variant {
            cfg.law_variant = v;
        }
        if let Some(p) = self.plot {
            cfg.output.plot = p;
        }
    }
}

impl GlobalArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            dt: self.dt,
            law_variant: self.law_variant.map(Into::into),
            plot: match (self.plot, self.no_plot) {
                (true, _) => Some(true),
                (_, true) => Some(false),
                _ => None,
            },
        }
    }
}

/// Reads a run configuration or the configuration embedded in a manifest.
/// Relative dataset paths are resolved against the file's directory.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let is_manifest = text.lines().any(|l| l.trim_start().starts_with("toolkit_version"));
    let mut cfg = if is_manifest {
        read_manifest(path)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?
            .config
    } else {
        RunConfig::from_toml_str(&text, path)?
    };
    if let Some(ds) = cfg.dataset.as_mut() {
        let base = path.parent().unwrap_or(Path::new(""));
        ds.path = absolute(&base.join(&ds.path));
    }
    Ok(cfg)
}

fn absolute(p: &Path) -> PathBuf {
    std::fs::canonicalize(p)
        .or_else(|_| std::path::absolute(p))
        .unwrap_or_else(|_| p.to_path_buf())
}

/// Configuration after file, preset and flag handling.
pub fn resolve_config(global: &GlobalArgs, command: &Command) -> Result<RunConfig, CliError> {
    let mut cfg = match (&global.config, &global.preset) {
        (Some(_), Some(_)) => return Err(CliError::Usage("--config and --preset are mutually exclusive".into())),
        (Some(path), None) => load_config(path)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => return Err(CliError::Usage("a configuration is required: pass --config or --preset".into())),
    };
    global.overrides().apply(&mut cfg);
    if let Command::Identify { dataset: Some(path) } = command {
        let previous = cfg.dataset.take();
        cfg.dataset = Some(DatasetConfig {
            path: absolute(path),
            stage: previous.as_ref().map(|d| d.stage).unwrap_or_default(),
            r0: previous.map_or(osmoid::plant::BASAL_LEVEL_R0, |d| d.r0),
        });
        cfg.plant = None;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Directory of a run named `name` below `root`.
pub fn run_dir(root: &Path, name: &str) -> Result<PathBuf, CliError> {
    let mut dir = root.to_path_buf();
    let mut any = false;
    for part in name.split('/').filter(|p| !p.is_empty()) {
        if part == "." || part == ".." {
            return Err(CliError::Usage(format!("run name `{name}` may not contain `.` or `..` components")));
        }
        let clean: String = part
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
            .collect();
        dir.push(clean);
        any = true;
    }
    if !any {
        return Err(CliError::Usage("run name is empty".into()));
    }
    Ok(dir)
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let g = &cli.global;
    if let Command::Report { dir } = &cli.command {
        return report(dir).map(|n| println!("wrote plots for {n} run(s) under {}", dir.display()));
    }
    let cfg = resolve_config(g, &cli.command)?;
    match &cli.command {
        Command::Simulate => {
            let dir = simulate(&cfg, &g.out_dir)?;
            println!("{}", dir.display());
        }
        Command::Identify { .. } => {
            let (dir, verdict) = identify(&cfg, &g.out_dir)?;
            let [a, b, c] = verdict.final_params;
            println!(
                "{}: a_hat={a:.6} b_hat={b:.6} c_hat={c:.6} steady_bias={:.6} converged={}",
                dir.display(),
                verdict.steady_bias,
                verdict.converged
            );
        }
        Command::Sweep => {
            let summary = sweep(&cfg, &g.out_dir, g.workers)?;
            println!("{}", summary.path.display());
            summary.into_result()?;
        }
        Command::Report { .. } => unreachable!(),
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = if cli.global.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
