use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use viflow_cli::commands::{self, Common};
use viflow_cli::{EXIT_CHECK_FAILED, EXIT_PASS};

/// Steady Stokes and Navier-Stokes flow with friction boundary conditions.
#[derive(Parser, Debug)]
#[command(name = "viflow", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args, Debug, Clone)]
struct Flags {
    /// Problem configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `[output] directory`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for independent sub-solves.
    #[arg(long, value_name = "N", default_value_t = 1)]
    threads: usize,
    /// Proceed despite admissibility warnings.
    #[arg(long)]
    override_admissibility: bool,
}

impl From<Flags> for Common {
    fn from(f: Flags) -> Self {
        Common {
            config: f.config,
            out: f.out,
            threads: f.threads,
            override_admissibility: f.override_admissibility,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Solve and export fields, traces, multipliers and a report.
    Solve(Flags),
    /// Solve and run the estimate, complementarity, threshold-sweep and
    /// data-Lipschitz checks.
    Check(Flags),
    /// Built-in manufactured-solution and limit studies.
    Mms {
        #[command(flatten)]
        flags: Flags,
        /// Case name; overrides `[mms] case`.
        #[arg(long)]
        case: Option<String>,
        /// Refinement levels; overrides `[mms] levels`.
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Check a mesh file, and the patch set when a config is given.
    ValidateMesh {
        #[command(flatten)]
        flags: Flags,
        #[arg(long, value_name = "PATH")]
        mesh: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VIFLOW_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { EXIT_PASS });
        }
    };
    let result = match cli.verb {
        Verb::Solve(f) => commands::solve(&f.into()),
        Verb::Check(f) => commands::check(&f.into()),
        Verb::Mms { flags, case, levels } => commands::mms(&flags.into(), case.as_deref(), levels),
        Verb::ValidateMesh { flags, mesh } => commands::validate_mesh(&flags.into(), mesh.as_deref()),
    };
    match result {
        Ok(o) => {
            for l in &o.lines {
                println!("{l}");
            }
            ExitCode::from(if o.pass { EXIT_PASS } else { EXIT_CHECK_FAILED })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
