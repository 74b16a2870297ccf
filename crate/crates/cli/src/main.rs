use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use etc_stab::sim::TriggerMode;
use etc_stab_cli::commands::{self, Outcome, SweepParam};
use etc_stab_cli::{exit, scenario, CliError};

#[derive(Parser)]
#[command(
    name = "etc-stab",
    version,
    about = "Event-triggered leader-follower stabilization: design, simulate, analyze"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report iSCC cells, rank check, pinning and the grounded-matrix certificate
    CheckGraph { file: PathBuf },
    /// Solve for the feedback gain and print the certificate as JSON
    Design { file: PathBuf },
    /// Run one simulation and write trajectory, events, metrics and report
    Simulate {
        file: PathBuf,
        /// setc, setc-inst or detc; defaults to the file's trigger.mode
        #[arg(long)]
        mode: Option<TriggerMode>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one simulation per parameter value and tabulate the results
    Sweep {
        file: PathBuf,
        /// k-scale, beta, sigma, theta, mu or h
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
        values: Vec<f64>,
        #[arg(long)]
        mode: Option<TriggerMode>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cmd: Command) -> Result<Outcome, CliError> {
    match cmd {
        Command::CheckGraph { file } => commands::check_graph(&scenario::load(&file)?),
        Command::Design { file } => commands::design(&scenario::load(&file)?),
        Command::Simulate { file, mode, out } => {
            commands::simulate(&scenario::load(&file)?, mode, out.as_deref())
        }
        Command::Sweep {
            file,
            param,
            values,
            mode,
            out,
        } => commands::sweep(
            &scenario::load(&file)?,
            param,
            &values,
            mode,
            out.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() {
                exit::VALIDATION
            } else {
                exit::SUCCESS
            };
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(cli.command) {
        Ok(out) => {
            print!("{}", out.text);
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
