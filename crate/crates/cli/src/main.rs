use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use branchpde_cli::{run, Command, Overrides, RunConfig, EXIT_CONFIG, EXIT_OK, THREADS_ENV};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "branchpde",
    version,
    about = "Branching-tree Monte Carlo for nonlocal semilinear PDEs"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Estimate u(t, x) or one of its first derivatives at a single point.
    Estimate(Flags),
    /// Estimate along a grid in x1.
    Sweep(Flags),
    /// Check the moment conditions and horizon bounds.
    Check(Flags),
    /// Sample the subordinator and test its Laplace transform.
    SampleDiag(Flags),
}

#[derive(Args)]
struct Flags {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_trees: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Refuse to run when the horizon is not certified.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK } as u8);
        }
    };
    let (command, flags) = match cli.command {
        Sub::Estimate(f) => (Command::Estimate, f),
        Sub::Sweep(f) => (Command::Sweep, f),
        Sub::Check(f) => (Command::Check, f),
        Sub::SampleDiag(f) => (Command::SampleDiag, f),
    };
    let overrides = Overrides {
        seed: flags.seed,
        n_trees: flags.n_trees,
        workers: flags.workers,
        strict: flags.strict,
        out: flags.out,
    };
    let env = std::env::var(THREADS_ENV).ok();
    let outcome = RunConfig::load(&flags.config).and_then(|mut cfg| {
        cfg.apply(&overrides, env.as_deref())?;
        let stdout = io::stdout();
        let mut out = stdout.lock();
        let code = run(command, &cfg, &mut out, &mut io::stderr())?;
        let _ = out.flush();
        Ok(code)
    });
    let code = match outcome {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
