use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use openerg::descriptor::{self, Format, Overrides};
use openerg::simulate::Method;

/// Assemble a wiring descriptor, simulate it and export the trajectory.
#[derive(Parser, Debug)]
#[command(name = "simulate", version)]
struct Cli {
    /// Descriptor file (text, or JSON with a `.json` extension).
    descriptor: PathBuf,
    /// Step size.
    #[arg(long)]
    dt: Option<f64>,
    /// Number of steps.
    #[arg(long)]
    steps: Option<usize>,
    /// euler, rk4 or symplectic.
    #[arg(long)]
    method: Option<Method>,
    /// Output file; without one the table goes to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<Format>,
    /// Also emit bob positions.
    #[arg(long)]
    cartesian: bool,
    /// File of initial states, one per line; runs them all in parallel,
    /// writing indexed copies of the output path.
    #[arg(long, value_name = "FILE")]
    sweep: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let d = descriptor::load(&cli.descriptor)?;
    let overrides = Overrides {
        dt: cli.dt,
        steps: cli.steps,
        method: cli.method,
        output: cli.output,
        format: cli.format,
        cartesian: cli.cartesian,
    };
    if let Some(path) = &cli.sweep {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let initials =
            descriptor::parse_initials(&text).with_context(|| format!("in {}", path.display()))?;
        let written = descriptor::run_sweep(&d, &overrides, &initials)?;
        for p in written {
            eprintln!("wrote {}", p.display());
        }
        return Ok(());
    }
    let out = descriptor::run(&d, &overrides)?;
    match out.path {
        Some(p) => eprintln!("wrote {}", p.display()),
        None => std::io::stdout()
            .lock()
            .write_all(out.contents.as_bytes())
            .context("writing to stdout")?,
    }
    Ok(())
}
