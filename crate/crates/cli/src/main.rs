#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod problem;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Run;
use crate::config::{Config, KEYS};
use crate::error::{CliError, EXIT_PASS};

/// Pucci extremal operators on the Heisenberg group: checks, barriers, solver and
/// qualitative diagnostics.
///
/// Configuration is a flat `key = value` file; `hpucci keys` lists every key with its
/// default. Exit codes: 0 pass, 1 failed assertion, 2 usage or configuration error,
/// 3 numerical failure.
#[derive(Parser, Debug)]
#[command(name = "hpucci", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Accepted before and after the subcommand; later values win and `--set` lists add up.
#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides out.dir).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for all random sampling (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

impl Common {
    fn then(&self, later: &Common) -> Common {
        Common {
            config: later.config.clone().or_else(|| self.config.clone()),
            set: self.set.iter().chain(&later.set).cloned().collect(),
            out: later.out.clone().or_else(|| self.out.clone()),
            seed: later.seed.or(self.seed),
            quiet: self.quiet || later.quiet,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Group, Pucci and radial-calculus identities on random samples.
    AlgebraCheck {
        #[command(flatten)]
        common: Common,
    },
    /// Nonlinear dimensions and, optionally, residuals of the radial solutions.
    Fundamental {
        #[arg(long)]
        check_residual: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Barrier diagnostics.
    Barrier {
        #[command(subcommand)]
        which: BarrierCommand,
    },
    /// Solve the configured Dirichlet problem on a grid.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Three-sphere inequality for the ball-minimum profile.
    Hadamard {
        #[command(flatten)]
        common: Common,
    },
    /// Monotonicity of m(r) r^(beta-2) and superlevel-measure scaling.
    Harnack {
        #[command(flatten)]
        common: Common,
    },
    /// Bounded nonconstant supersolution and the flatness probe.
    Liouville {
        #[command(flatten)]
        common: Common,
    },
    /// List configuration keys with defaults.
    Keys,
}

#[derive(Subcommand, Debug)]
enum BarrierCommand {
    /// Gradient ratio at the characteristic point of the gauge-ball cap.
    Ratio {
        #[arg(long, allow_hyphen_values = true)]
        t0: f64,
        /// Fail unless the limit estimate is within 1e-3 of this value.
        #[arg(long)]
        expect: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Residuals of the two annulus barriers.
    Annulus {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> Common {
        match self {
            Command::AlgebraCheck { common }
            | Command::Fundamental { common, .. }
            | Command::Solve { common }
            | Command::Hadamard { common }
            | Command::Harnack { common }
            | Command::Liouville { common }
            | Command::Barrier { which: BarrierCommand::Ratio { common, .. } | BarrierCommand::Annulus { common } } => {
                common.clone()
            }
            Command::Keys => Common::default(),
        }
    }
}

fn load(opts: &Common) -> Result<Run, CliError> {
    let mut cfg = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
            Config::parse(&text, &path.display().to_string())?
        }
        None => Config::default(),
    };
    for s in &opts.set {
        cfg.set(s)?;
    }
    let seed = match opts.seed {
        Some(s) => s,
        None => cfg.get("seed")?,
    };
    let out = match &opts.out {
        Some(d) => d.clone(),
        None => PathBuf::from(cfg.get::<String>("out.dir")?),
    };
    Ok(Run::new(cfg, seed, out, opts.quiet))
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    if let Command::Keys = cli.command {
        for k in KEYS {
            println!("{:<28} {:<34} {}", k.name, k.default.unwrap_or("(none)"), k.help);
        }
        return Ok(EXIT_PASS);
    }
    let mut run = load(&cli.common.then(&cli.command.common()))?;
    match &cli.command {
        Command::AlgebraCheck { .. } => commands::algebra_check(&mut run)?,
        Command::Fundamental { check_residual, .. } => commands::fundamental(&mut run, *check_residual)?,
        Command::Barrier { which: BarrierCommand::Ratio { t0, expect, .. } } => {
            commands::barrier_ratio(&mut run, *t0, *expect)?
        }
        Command::Barrier { which: BarrierCommand::Annulus { .. } } => commands::barrier_annulus(&mut run)?,
        Command::Solve { .. } => commands::solve(&mut run)?,
        Command::Hadamard { .. } => commands::hadamard(&mut run)?,
        Command::Harnack { .. } => commands::harnack(&mut run)?,
        Command::Liouville { .. } => commands::liouville(&mut run)?,
        Command::Keys => unreachable!(),
    }
    Ok(run.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("hpucci: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
