use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rbsde_cli::commands::{self, Format, Output, SideArg, Suite};
use rbsde_cli::report::to_json;
use rbsde_cli::scenario::BUDGET_ENV;
use rbsde_cli::tree_io::TreeDoc;
use rbsde_cli::{exit, load_scenario, schemas, CliError, CliResult, Mode};

/// Acceptable prices, hedges and exercise times of contracts with cash flows
/// on event trees, with oracle-based verification.
///
/// Exit codes: 0 success, 1 verification failures, 2 parse errors, 3 solver errors.
#[derive(Parser)]
#[command(name = "rbsde", version, after_help = format!("Environment: {BUDGET_ENV} sets the default stopping-time enumeration budget."))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Issuer and holder acceptable prices with hedges.
    Price {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = SideArg::Both)]
        side: SideArg,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// `json` for the price report, `csv` for the per-node process dump.
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Check solver output against the oracles; exit 1 if any check fails.
    Verify {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = Suite::Full)]
        suite: Suite,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rational exercise times and break-even classification per stopping time.
    Exercise {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the scenario's event tree as JSON.
    Tree {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a shipped JSON schema.
    Schema {
        #[arg(value_enum)]
        which: schemas::Which,
    },
}

fn emit(out: &Output, path: Option<&PathBuf>) -> CliResult<i32> {
    match path {
        Some(p) => fs::write(p, &out.text)
            .map_err(|e| CliError::Output { path: p.display().to_string(), message: e.to_string() })?,
        None => print!("{}", out.text),
    }
    Ok(out.exit)
}

fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Price { scenario, side, out, format } => {
            let s = load_scenario(&scenario)?;
            emit(&commands::price(&s, side, format)?, out.as_ref())
        }
        Command::Verify { scenario, suite, out } => {
            let s = load_scenario(&scenario)?;
            emit(&commands::verify(&s, suite)?, out.as_ref())
        }
        Command::Exercise { scenario, out } => {
            let s = load_scenario(&scenario)?;
            emit(&commands::exercise(&s)?, out.as_ref())
        }
        Command::Tree { scenario, out } => {
            let s = load_scenario(&scenario)?;
            let doc = match s.scenario.mode {
                Mode::Rational => TreeDoc::from_tree(&s.tree::<rbsde_core::Rational>()?),
                Mode::Float => TreeDoc::from_tree(&s.tree::<f64>()?),
            };
            emit(&Output { text: to_json(&doc), exit: exit::OK }, out.as_ref())
        }
        Command::Schema { which } => emit(&Output { text: which.text().to_string(), exit: exit::OK }, None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("rbsde: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
