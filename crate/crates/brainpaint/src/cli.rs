//! `brainpaint` subcommands. Diagnostics go to stderr as `LEVEL code message`
//! lines; exit status is 0 on success, 2 for input errors, 3 for config
//! errors and 4 for render or I/O errors.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use brainpaint_core::atlas::{atlas_definition, BUILTIN_ATLASES};
use brainpaint_core::config::ConfigError;
use brainpaint_core::mesh::write_fixture_assets;
use brainpaint_core::pipeline::{self, PipelineError, PipelineOptions, RunMode};
use brainpaint_core::{load_config, Diagnostic, RunConfig};
use clap::{Args, Parser, Subcommand};

use crate::service::{self, ServiceConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_RENDER: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "brainpaint",
    version,
    about = "Paint brain atlas regions from a table of values"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render one PNG per CSV row and view, plus animation frames if the
    /// config asks for them.
    Render(RunArgs),
    /// Render only the animation frames that interpolate between rows.
    Animate(RunArgs),
    /// Write synthetic mesh assets for the built-in atlases.
    Fixtures(FixtureArgs),
    /// Check a config and CSV without rendering.
    Validate(ValidateArgs),
    /// Run the HTTP job service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON config file; relative paths inside it are resolved against its
    /// directory. Defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Biomarker CSV: image names in the first column, one region per
    /// further column.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Render jobs to run at once.
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    /// Asset root to write into (one subdirectory per atlas).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Atlases to generate; all built-in atlases by default.
    #[arg(long = "atlas")]
    pub atlases: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "BRAINPAINT_ADDR", default_value = service::DEFAULT_ADDR)]
    pub addr: SocketAddr,
    /// Directory holding job inputs, state and outputs.
    #[arg(long, env = "BRAINPAINT_DATA_DIR", default_value = "brainpaint-data")]
    pub data_dir: PathBuf,
    /// Mesh asset root used for every job.
    #[arg(long, env = "BRAINPAINT_ASSET_ROOT", default_value = "assets")]
    pub assets: PathBuf,
    /// Jobs rendered at the same time.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Jobs waiting beyond which submissions get 429.
    #[arg(long, default_value_t = 16)]
    pub queue: usize,
    /// Seconds a finished job stays downloadable.
    #[arg(long, env = "BRAINPAINT_RETENTION_SECS", default_value_t = service::DEFAULT_RETENTION_SECS)]
    pub retention_secs: u64,
}

fn report(err: &mut dyn Write, diags: &[Diagnostic]) {
    for d in diags {
        let _ = writeln!(err, "{d}");
    }
}

fn config_failure(err: &mut dyn Write, e: &ConfigError) -> i32 {
    let code = match e {
        ConfigError::Io { .. } => "config_unreadable",
        ConfigError::Invalid { .. } => "invalid_config",
    };
    report(err, &[Diagnostic::error(code, e.to_string())]);
    EXIT_CONFIG
}

fn pipeline_failure(err: &mut dyn Write, e: &PipelineError) -> i32 {
    report(err, &e.diagnostics());
    e.exit_code()
}

fn read_config(path: Option<&Path>) -> Result<RunConfig, ConfigError> {
    match path {
        Some(p) => load_config(p),
        None => Ok(RunConfig::default()),
    }
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match cli.command {
        Command::Render(a) => run_pipeline(a, RunMode::Render, out, err),
        Command::Animate(a) => run_pipeline(a, RunMode::Animate, out, err),
        Command::Fixtures(a) => fixtures(a, out, err),
        Command::Validate(a) => validate(a, out, err),
        Command::Serve(a) => serve(a, err),
    }
}

fn run_pipeline(args: RunArgs, mode: RunMode, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let mut cfg = match read_config(args.config.as_deref()) {
        Ok(c) => c,
        Err(e) => return config_failure(err, &e),
    };
    if let Some(dir) = args.output {
        cfg.output_dir = dir;
    }
    let opts = PipelineOptions {
        mode,
        jobs: args.jobs.map(usize::from),
        ..PipelineOptions::default()
    };
    match pipeline::run_pipeline(&cfg, &args.input, &opts) {
        Ok(m) => {
            report(err, &m.warnings);
            let frames = m.animation.as_ref().map_or(0, |a| a.frames.len());
            let _ = writeln!(
                out,
                "wrote {} images and {frames} animation frames to {}",
                m.outputs.len(),
                cfg.output_dir.display()
            );
            EXIT_OK
        }
        Err(e) => pipeline_failure(err, &e),
    }
}

fn validate(args: ValidateArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cfg = match read_config(args.config.as_deref()) {
        Ok(c) => c,
        Err(e) => return config_failure(err, &e),
    };
    let csv = match std::fs::read_to_string(&args.input) {
        Ok(t) => t,
        Err(e) => {
            report(
                err,
                &[Diagnostic::error(
                    "input_unreadable",
                    format!("cannot read {}: {e}", args.input.display()),
                )],
            );
            return EXIT_INPUT;
        }
    };
    match pipeline::prepare(&cfg, &csv) {
        Ok(p) => {
            report(err, &p.warnings);
            let _ = writeln!(
                out,
                "ok: {} rows x {} views, {} regions from atlas {}",
                p.table.rows.len(),
                p.views.len(),
                p.table.region_order.len(),
                p.atlas.name
            );
            EXIT_OK
        }
        Err(e) => pipeline_failure(err, &e),
    }
}

fn fixtures(args: FixtureArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let names: Vec<String> = if args.atlases.is_empty() {
        BUILTIN_ATLASES.iter().map(|s| s.to_string()).collect()
    } else {
        args.atlases
    };
    let mut total = 0;
    for name in &names {
        let atlas = match atlas_definition(name, &args.out) {
            Ok(a) => a,
            Err(e) => {
                report(err, &[Diagnostic::error("unknown_atlas", e.to_string())]);
                return EXIT_CONFIG;
            }
        };
        match write_fixture_assets(&atlas, &args.out, args.seed) {
            Ok(n) => total += n,
            Err(e) => {
                report(
                    err,
                    &[Diagnostic::error(
                        "io",
                        format!("writing fixtures under {}: {e}", args.out.display()),
                    )],
                );
                return EXIT_RENDER;
            }
        }
    }
    let _ = writeln!(
        out,
        "wrote {total} meshes for {} atlases to {}",
        names.len(),
        args.out.display()
    );
    EXIT_OK
}

fn serve(args: ServeArgs, err: &mut dyn Write) -> i32 {
    let cfg = ServiceConfig {
        data_dir: args.data_dir,
        asset_root: args.assets,
        workers: args.workers.max(1),
        queue_capacity: args.queue.max(1),
        retention: Duration::from_secs(args.retention_secs),
        ..ServiceConfig::default()
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            report(err, &[Diagnostic::error("io", format!("cannot start runtime: {e}"))]);
            return EXIT_RENDER;
        }
    };
    match runtime.block_on(service::serve(cfg, args.addr)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            report(err, &[Diagnostic::error("io", format!("service stopped: {e}"))]);
            EXIT_RENDER
        }
    }
}
