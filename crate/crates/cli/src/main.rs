mod config;
mod error;
mod run;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;
use qedhf::checks;

use config::{Format, RunConfig, VerifyConfig};
use error::{CliError, Result};

/// Squeezed and displaced mean-field solver for electron-boson systems.
#[derive(Debug, Parser)]
#[command(name = "qedhf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a parameter sweep and write one row per grid point.
    Run {
        config: PathBuf,
        /// Output file; overrides the config. `-` writes to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker threads (default: available cores).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Run the invariant suite and report one line per check.
    Verify {
        config: Option<PathBuf>,
        /// Report file in addition to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Test hook: scale the squeeze pair coefficient.
        #[arg(long, hide = true)]
        inject_pair_scale: Option<f64>,
        /// Test hook: offset every analytic gradient.
        #[arg(long, hide = true)]
        inject_gradient_offset: Option<f64>,
    },
}

fn fixture_dir() -> PathBuf {
    checks::fixture_dir()
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn open(path: &Path) -> Result<Box<dyn Write>> {
    if path == Path::new("-") {
        return Ok(Box::new(std::io::stdout().lock()));
    }
    let f = File::create(path).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
    Ok(Box::new(BufWriter::new(f)))
}

fn run(
    path: &Path,
    output: Option<PathBuf>,
    jobs: Option<usize>,
    seed: Option<u64>,
    format: Option<Format>,
) -> Result<ExitCode> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(f) = format {
        cfg.output.format = f;
    }
    if let Some(o) = output {
        cfg.output.path = Some(o);
    }
    let jobs = jobs.unwrap_or_else(default_jobs);
    if jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let rows = run::run_grid(&cfg, base, &fixture_dir(), jobs)?;
    let target = cfg.output.path.clone().unwrap_or_else(|| PathBuf::from("-"));
    run::write_rows(&rows, cfg.output.format, open(&target)?)?;
    Ok(if rows.iter().all(run::Row::failed) {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn verify(
    path: Option<PathBuf>,
    output: Option<PathBuf>,
    seed: Option<u64>,
    pair_scale: Option<f64>,
    gradient_offset: Option<f64>,
) -> Result<ExitCode> {
    let mut cfg = match &path {
        Some(p) => VerifyConfig::load(p)?,
        None => VerifyConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(v) = pair_scale {
        cfg.faults.pair_scale = v;
    }
    if let Some(v) = gradient_offset {
        cfg.faults.gradient_offset = v;
    }
    let dir = cfg.fixtures.clone().unwrap_or_else(fixture_dir);
    let outcomes =
        checks::run_suite(&dir, cfg.seed, cfg.faults, &cfg.solver).map_err(|e| CliError::Config(e.to_string()))?;
    let mut report = String::new();
    for o in &outcomes {
        report.push_str(&o.line());
        report.push('\n');
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    report.push_str(&format!("{} of {} checks pass\n", outcomes.len() - failed, outcomes.len()));
    print!("{report}");
    if let Some(p) = output {
        std::fs::write(&p, &report).map_err(|e| CliError::Output(format!("{}: {e}", p.display())))?;
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            output,
            jobs,
            seed,
            format,
        } => run(&config, output, jobs, seed, format),
        Command::Verify {
            config,
            output,
            seed,
            inject_pair_scale,
            inject_gradient_offset,
        } => verify(config, output, seed, inject_pair_scale, inject_gradient_offset),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
