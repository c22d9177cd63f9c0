//! The `valconf` command line. Every subcommand loads and validates its
//! inputs, computes its results in memory, and only then writes output files
//! together with a run manifest.

pub mod args;
mod commands;
pub mod config;
pub mod manifest;
pub mod plot;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, SUBCOMMANDS};
use manifest::{entry_for_bytes, entry_for_file, manifest_path, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] valconf_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

/// What a subcommand produced, before anything touches the disk.
#[derive(Debug, Default)]
pub struct Run {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<(PathBuf, Vec<u8>)>,
    pub stdout: Option<String>,
    pub config: serde_json::Value,
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match inject_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => EXIT_USAGE,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    init_logging(&cli.log);
    init_threads();
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_logging(level: &str) {
    let _ = env_logger::Builder::new().parse_filters(level).parse_env("RUST_LOG").format_timestamp(None).try_init();
}

/// Caps the worker pool at `VALCONF_THREADS` when set.
fn init_threads() {
    let Ok(raw) = std::env::var("VALCONF_THREADS") else {
        return;
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
                log::debug!("thread pool already initialized");
            }
        }
        _ => log::warn!("ignoring VALCONF_THREADS={raw:?}; expected a positive integer"),
    }
}

/// Finds `--config FILE` and the subcommand in raw arguments and splices the
/// config-derived flags in right after the subcommand name.
fn inject_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut config: Option<PathBuf> = None;
    let mut sub_pos: Option<usize> = None;
    let mut i = 1;
    while i < argv.len() {
        let a = argv[i].to_string_lossy();
        if a == "--config" {
            config = argv.get(i + 1).map(PathBuf::from);
            i += 2;
            continue;
        }
        if let Some(rest) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(rest));
        } else if a == "--log" {
            i += 2;
            continue;
        } else if sub_pos.is_none() && SUBCOMMANDS.contains(&a.as_ref()) {
            sub_pos = Some(i);
        }
        i += 1;
    }
    let (Some(path), Some(pos)) = (config, sub_pos) else {
        return Ok(argv);
    };
    let sub = argv[pos].to_string_lossy().into_owned();
    // list-valued flags accumulate in clap, so anything given explicitly
    // replaces the config entry instead of extending it
    let explicit: Vec<String> = argv[pos + 1..]
        .iter()
        .filter_map(|a| a.to_str()?.strip_prefix("--").map(|f| f.split('=').next().unwrap_or(f).to_string()))
        .collect();
    let flags: Vec<OsString> = config::config_flags(&path, &sub)?
        .into_iter()
        .filter(|f| {
            let name = f.to_string_lossy();
            let name = name.trim_start_matches("--").split('=').next().unwrap_or_default().to_string();
            !explicit.contains(&name)
        })
        .collect();
    let mut out = argv[..=pos].to_vec();
    out.extend(flags);
    out.extend(argv[pos + 1..].iter().cloned());
    Ok(out)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let name = cli.command.name();
    let mut run = commands::dispatch(&cli.command)?;
    if let Some(cfg) = &cli.config {
        run.inputs.push(cfg.clone());
    }
    if let Some(text) = &run.stdout {
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e))?;
    }
    if run.outputs.is_empty() {
        return Ok(());
    }
    let inputs = run.inputs.iter().map(|p| entry_for_file(p)).collect::<Result<Vec<_>, _>>()?;
    let mut outputs = Vec::with_capacity(run.outputs.len());
    for (path, bytes) in &run.outputs {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
        outputs.push(entry_for_bytes(path, bytes));
    }
    let manifest = RunManifest::new(name, run.config, inputs, outputs);
    let path = manifest_path(&run.outputs[0].0);
    let mut text = serde_json::to_vec_pretty(&manifest)?;
    text.push(b'\n');
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(())
}
