use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use qdsaw_cli::commands::{self, Outcome};
use qdsaw_cli::config::RunConfig;
use qdsaw_cli::error::{CliError, CliResult};
use qdsaw_cli::output::{write_outputs, Manifest};
use qdsaw_cli::recipes::recipes;

/// Optically driven quantum dot under surface-acoustic-wave modulation.
#[derive(Parser)]
#[command(name = "qdsaw", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory; overrides `output.dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Validate and print the resolved configuration; write nothing.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Seed for synthetic calibration data.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Single trajectory (or phase average) from a config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// One trajectory per value of `[sweep] axis`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Spectrum of the kind given in `[spectrum]`.
    Spectrum {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit a calibration model to imported or synthetic data.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Pulse durations that optimize the `[optimize]` objective.
    Optimize {
        #[arg(long)]
        config: PathBuf,
    },
    /// Regenerate the data behind a figure.
    Reproduce {
        /// Figure id; `list` prints the available ids.
        figure: String,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Sweep { .. } => "sweep",
            Command::Spectrum { .. } => "spectrum",
            Command::Calibrate { .. } => "calibrate",
            Command::Optimize { .. } => "optimize",
            Command::Reproduce { .. } => "reproduce",
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be ≥ 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let started = Instant::now();
    let name = cli.command.name();
    let (outcome, default_dir): (Outcome, PathBuf) = match &cli.command {
        Command::Reproduce { figure } => {
            if figure == "list" {
                for (id, r) in recipes().names().into_iter().map(|n| (n, recipes().get(n))) {
                    println!("{id:10} {}", r?.description());
                }
                return Ok(());
            }
            let recipe = recipes().get(figure)?;
            if cli.dry_run {
                println!("{}: {}", recipe.id(), recipe.description());
                return Ok(());
            }
            (commands::reproduce(figure)?, Path::new("out").join(figure))
        }
        Command::Simulate { config }
        | Command::Sweep { config }
        | Command::Spectrum { config }
        | Command::Calibrate { config }
        | Command::Optimize { config } => {
            let cfg = RunConfig::load(config)?;
            if cli.dry_run {
                print!("{}", cfg.to_toml());
                return Ok(());
            }
            let outcome = match &cli.command {
                Command::Simulate { .. } => commands::simulate(&cfg)?,
                Command::Sweep { .. } => commands::sweep(&cfg)?,
                Command::Spectrum { .. } => commands::spectrum(&cfg)?,
                Command::Calibrate { .. } => commands::calibrate(&cfg, cli.seed)?,
                Command::Optimize { .. } => commands::optimize(&cfg)?,
                Command::Reproduce { .. } => unreachable!(),
            };
            (outcome, cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("out")))
        }
    };
    let dir = cli.out.unwrap_or(default_dir);
    let mut manifest = Manifest::new(name, outcome.config_hash);
    manifest.checks = outcome.checks;
    manifest.wall_time_s = started.elapsed().as_secs_f64();
    write_outputs(&dir, &outcome.artifacts, &mut manifest)?;
    for c in &manifest.checks {
        println!(
            "{} {}: {} (target {})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.target
        );
    }
    println!("wrote {} files to {}", manifest.files.len() + 1, dir.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
