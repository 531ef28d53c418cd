use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use veilvote::accounting::{Granularity, VotingScheme};
use veilvote_cli::{cmd_account, cmd_compare, cmd_run, init_threads, AccountArgs};

#[derive(Parser)]
#[command(name = "veilvote", version, about = "Private federated learning by label voting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Ae,
    Knn,
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    Agent,
    Instance,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured scheme and write JSON-lines reports.
    Run { config: PathBuf },
    /// Compute a privacy report without training.
    Account {
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        #[arg(long, value_enum, default_value = "agent")]
        granularity: GranularityArg,
        /// Number of answered queries.
        #[arg(long = "q")]
        queries: u64,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        delta: f64,
        /// CSV of per-query margins (`query_id,gamma`).
        #[arg(long)]
        margins: Option<PathBuf>,
        /// Number of agents (needed with --margins).
        #[arg(long)]
        agents: Option<usize>,
        /// Number of classes (needed with --margins).
        #[arg(long)]
        classes: Option<usize>,
    },
    /// Run several schemes on shared data and write a comparison CSV.
    Compare { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let mut stderr = io::stderr();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    let code = match cli.command {
        Command::Run { config } => cmd_run(&config, &mut stderr),
        Command::Compare { config } => cmd_compare(&config, &mut stderr),
        Command::Account {
            scheme,
            granularity,
            queries,
            sigma,
            k,
            delta,
            margins,
            agents,
            classes,
        } => {
            let args = AccountArgs {
                scheme: match scheme {
                    SchemeArg::Ae => VotingScheme::Ae,
                    SchemeArg::Knn => VotingScheme::Knn,
                },
                granularity: match granularity {
                    GranularityArg::Agent => Granularity::Agent,
                    GranularityArg::Instance => Granularity::Instance,
                },
                queries,
                sigma,
                k,
                delta,
                margins,
                agents,
                classes,
            };
            cmd_account(&args, &mut io::stdout(), &mut stderr)
        }
    };
    ExitCode::from(code as u8)
}
