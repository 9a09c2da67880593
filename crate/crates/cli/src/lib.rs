//! Command-line experiment runner for the `nltzm` toolkit.

pub mod config;
pub mod experiments;
pub mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::manifest::{sha256_hex, unix_now, Outputs, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TASK_FAILURE: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "nltzm", version, about = "Run zero-mode experiments from TOML configs")]
pub struct Cli {
    /// Master RNG seed; overrides the config value.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config value.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads for parallel tasks (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// List the available experiments.
    List,
}

pub fn list_experiments() -> String {
    let mut s = format!("{:<10}  {:<74}  {}\n", "name", "description", "config");
    for (name, what, block) in experiments::CATALOG {
        s.push_str(&format!("{name:<10}  {what:<74}  {block}\n"));
    }
    s
}

/// Applies command-line overrides and returns the effective config.
pub fn effective_config(mut cfg: ExperimentConfig, seed: Option<u64>, out_dir: Option<&Path>) -> ExperimentConfig {
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(dir) = out_dir {
        cfg.out_dir = Some(dir.to_path_buf());
    }
    cfg
}

pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("runs").join(cfg.experiment.name()))
}

/// Runs a validated config and writes the manifest.
pub fn run(cfg: &ExperimentConfig) -> Result<RunManifest> {
    let started = unix_now();
    // the output location does not change results, so it stays out of the hash
    let recorded = ExperimentConfig { out_dir: None, ..cfg.clone() };
    let hash = sha256_hex(&serde_json::to_vec(&recorded)?);
    let dir = output_dir(cfg);
    let mut out = Outputs::new(&dir)?;
    out.write("config.json", &serde_json::to_vec_pretty(&recorded)?)?;
    experiments::run_experiment(cfg, &mut out)?;
    out.finish(cfg.experiment.name(), hash, cfg.seed, started)
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG_ERROR } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_CONFIG_ERROR;
        }
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::List => {
            print!("{}", list_experiments());
            EXIT_OK
        }
        Command::Run { config } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => effective_config(c, cli.seed, cli.out_dir.as_deref()),
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_CONFIG_ERROR;
                }
            };
            match run(&cfg) {
                Ok(m) if m.failed() => {
                    for t in m.tasks.iter().filter(|t| t.status == manifest::Status::Failed) {
                        eprintln!("failed: {} ({})", t.task, t.message.as_deref().unwrap_or(""));
                    }
                    EXIT_TASK_FAILURE
                }
                Ok(m) => {
                    println!("{}: {} files in {}", m.experiment, m.files.len(), output_dir(&cfg).display());
                    EXIT_OK
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    EXIT_TASK_FAILURE
                }
            }
        }
    }
}
