//! Batch front end: sweeps, phase diagrams, pipeline comparison, spectra,
//! plots and manifest re-runs.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod plot;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use commands::{Command, CommandOutput};
use config::{ConfigError, FlagOverrides, RunConfig};
use manifest::RunManifest;
use plot::{PlotError, PlotKind};

/// Process exit status, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExitStatus {
    Success,
    Convergence,
    Integration,
    Config,
    Mismatch,
    Io,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Config => 2,
            ExitStatus::Integration => 3,
            ExitStatus::Convergence => 4,
            ExitStatus::Mismatch => 5,
            ExitStatus::Io => 6,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Config(_) => ExitStatus::Config,
            CliError::Plot(PlotError::Malformed(_) | PlotError::Csv(_)) => ExitStatus::Config,
            CliError::Plot(_) | CliError::Io { .. } | CliError::Pool(_) => ExitStatus::Io,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "nrlz", version, about = "Nonreciprocal Landau-Zener tunneling under colored noise")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true, env = "NRLZ_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct RunArgs {
    /// TOML config file.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Dotted override, e.g. `--set physics.delta=0.5`; may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Noise realizations per cell.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig, ConfigError> {
        let flags = FlagOverrides {
            sets: self.sets.clone(),
            seed: self.seed,
            samples: self.samples,
            out: self.out.clone(),
        };
        RunConfig::load(self.config.as_deref(), &flags)
    }
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// P versus alpha for one method.
    Curve(RunArgs),
    /// P over an (alpha, delta) grid.
    PhaseDiagram(RunArgs),
    /// Several methods on a shared alpha axis.
    Compare(RunArgs),
    /// Instantaneous eigenvalues and exceptional points for one cell.
    Spectrum(RunArgs),
    /// Renders a CSV output as SVG.
    Plot {
        csv: PathBuf,
        /// Output file (default: the CSV path with an .svg extension).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the kind read from the CSV header line.
        #[arg(long, value_enum)]
        kind: Option<PlotKind>,
    },
    /// Re-runs a manifest and verifies every checksum.
    ManifestRerun {
        manifest: PathBuf,
        /// Output directory (default: `rerun/` next to the manifest).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Runs `cmd` on a pool of `workers` threads and writes its files and
/// manifest into the configured output directory.
pub fn execute(cfg: &RunConfig, cmd: Command, workers: Option<usize>) -> Result<(CommandOutput, RunManifest), CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Pool(e.to_string()))?;
    let started = Instant::now();
    let output = pool.install(|| commands::run(cfg, cmd))?;
    let seconds = started.elapsed().as_secs_f64();
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    for f in &output.files {
        let path = dir.join(&f.name);
        std::fs::write(&path, &f.contents).map_err(io_err(&path))?;
    }
    let manifest = RunManifest::new(cmd, cfg, &output, pool.current_num_threads(), seconds);
    manifest.write(dir).map_err(io_err(dir))?;
    log::info!(
        "{}: wrote {} files to {} in {seconds:.2} s",
        cmd.as_str(),
        output.files.len(),
        dir.display()
    );
    Ok((output, manifest))
}

fn rerun(path: &Path, out: Option<PathBuf>, workers: Option<usize>) -> Result<ExitStatus, CliError> {
    let original = RunManifest::read(path).map_err(io_err(path))?;
    let mut cfg = original.config.clone();
    cfg.output.dir = out.unwrap_or_else(|| path.parent().unwrap_or(Path::new(".")).join("rerun"));
    let (_, fresh) = execute(&cfg, original.command, workers)?;
    let diff = original.mismatches(&fresh);
    if diff.is_empty() {
        println!(
            "reproduced {} files and {} cells in {}",
            fresh.outputs.len(),
            fresh.cell_checksums.len(),
            cfg.output.dir.display()
        );
        Ok(ExitStatus::Success)
    } else {
        for d in &diff {
            eprintln!("mismatch: {d}");
        }
        Ok(ExitStatus::Mismatch)
    }
}

pub fn run(cli: Cli) -> Result<ExitStatus, CliError> {
    let grid_cmd = |args: &RunArgs, cmd: Command| -> Result<ExitStatus, CliError> {
        let cfg = args.load()?;
        let (output, _) = execute(&cfg, cmd, cli.workers)?;
        for f in &output.files {
            println!("{}", cfg.output.dir.join(&f.name).display());
        }
        Ok(output.status)
    };
    match &cli.command {
        Sub::Curve(a) => grid_cmd(a, Command::Curve),
        Sub::PhaseDiagram(a) => grid_cmd(a, Command::PhaseDiagram),
        Sub::Compare(a) => grid_cmd(a, Command::Compare),
        Sub::Spectrum(a) => grid_cmd(a, Command::Spectrum),
        Sub::Plot { csv, out, kind } => {
            let out = out.clone().unwrap_or_else(|| csv.with_extension("svg"));
            plot::render(csv, *kind, &out)?;
            println!("{}", out.display());
            Ok(ExitStatus::Success)
        }
        Sub::ManifestRerun { manifest, out } => rerun(manifest, out.clone(), cli.workers),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct() {
        let all = [
            ExitStatus::Success,
            ExitStatus::Convergence,
            ExitStatus::Integration,
            ExitStatus::Config,
            ExitStatus::Mismatch,
            ExitStatus::Io,
        ];
        let mut codes: Vec<i32> = all.iter().map(|s| s.code()).collect();
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), all.len());
        assert_eq!(ExitStatus::Success.code(), 0);
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "nrlz",
            "--workers",
            "2",
            "curve",
            "--set",
            "physics.delta=0.5",
            "--seed",
            "7",
            "--out",
            "o",
        ])
        .unwrap();
        assert_eq!(cli.workers, Some(2));
        let Sub::Curve(args) = cli.command else { panic!("wrong subcommand") };
        let cfg = args.load().unwrap();
        assert_eq!(cfg.method.seed, 7);
        assert_eq!(cfg.output.dir, PathBuf::from("o"));
        assert!(Cli::try_parse_from(["nrlz", "plot"]).is_err());
    }
}
