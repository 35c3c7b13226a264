//! Command-line front end for `flex-core`.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 IO error.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use flex_core::ModulationMode;

use crate::config::{FlexConfig, Overrides};
use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FLEX_OUT_DIR";
const FALLBACK_OUT_DIR: &str = "flex-out";

#[derive(Debug, Parser)]
#[command(
    name = "flex",
    version,
    about = "Rotary modulation, antiphase noise and sink-window analyses"
)]
pub struct Cli {
    /// TOML config file, or a manifest.json from a previous run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $FLEX_OUT_DIR, else ./flex-out).
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
    /// Override the noise and verification seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Restrict to one modulation mode.
    #[arg(long, global = true, value_parser = parse_mode)]
    pub mode: Option<ModulationMode>,
    /// Override the noise correlation.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// Override the inference length in latent frames.
    #[arg(long, global = true)]
    pub target_len: Option<usize>,
    /// Print the default configuration and exit.
    #[arg(long)]
    pub print_default_config: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Per-plane frequency, exposure, gate and phase-step tables.
    RopeAnalyze,
    /// Monte-Carlo and quadrature checks of the noise closed forms.
    NoiseVerify,
    /// Toy chunk-wise generation for each modulation mode.
    Simulate,
}

fn parse_mode(s: &str) -> Result<ModulationMode, String> {
    s.parse().map_err(|e: flex_core::FlexError| e.to_string())
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            mode: self.mode,
            rho: self.rho,
            target_len: self.target_len,
        }
    }

    pub fn resolve_config(&self) -> Result<FlexConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => FlexConfig::load(path)?,
            None => FlexConfig::default(),
        };
        cfg.apply(&self.overrides());
        Ok(cfg)
    }

    fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
    }
}

/// Runs one parsed invocation; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    if cli.print_default_config {
        print!("{}", FlexConfig::default().to_toml());
        return 0;
    }
    let Some(command) = cli.command else {
        eprintln!("flex: no command given (try --help)");
        return 2;
    };
    match execute(cli, command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("flex: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, command: Command) -> Result<(), CliError> {
    let cfg = cli.resolve_config()?;
    let out = cli.out_dir();
    match command {
        Command::RopeAnalyze => {
            for f in commands::rope_analyze(&cfg, &out)? {
                println!("wrote {}", out.join(f).display());
            }
        }
        Command::NoiseVerify => {
            let checks = commands::noise_verify(&cfg, &out)?;
            for c in &checks {
                println!("{}", c.line());
            }
            let failed: Vec<String> = checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| c.name.clone())
                .collect();
            if !failed.is_empty() {
                return Err(CliError::Verification(failed));
            }
            println!("all {} checks passed", checks.len());
        }
        Command::Simulate => {
            for (mode, trace) in commands::simulate(&cfg, &out)? {
                println!(
                    "{mode}: {} frames, adjacent_energy {}",
                    trace.frames.nrows(),
                    trace.metrics["adjacent_energy"]
                );
            }
            println!("outputs in {}", out.display());
        }
    }
    Ok(())
}

/// Parses `args` and runs; clap usage errors exit with 2.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            code
        }
    }
}
