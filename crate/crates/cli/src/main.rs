use std::io::Write;

use clap::{Parser, Subcommand};
use rankos_cli::commands::{
    cmd_are, cmd_null_table, cmd_pitman, cmd_power, cmd_smooth, cmd_test, AreArgs, NullTableArgs, PitmanArgs,
    PowerArgs, SmoothArgs, TestArgs,
};
use rankos_cli::{exit, CliError, CliResult};
use serde_json::Value;

/// Rank-based order-selection lack-of-fit tests.
#[derive(Debug, Parser)]
#[command(name = "rankos", version)]
struct Cli {
    /// Seed for every random draw. Required for randomized steps unless
    /// running interactively.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores). Results do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test the no-effect (or linear model) hypothesis on a dataset.
    Test(TestArgs),
    /// Tabulate an exact or Monte Carlo null distribution.
    NullTable(NullTableArgs),
    /// Write raw and rank series smooths.
    Smooth(SmoothArgs),
    /// Empirical and limiting power curves under a local alternative.
    Power(PowerArgs),
    /// Efficiency of the rank test relative to the raw-data test.
    Are(AreArgs),
    /// Rank test at n against the raw test at n divided by the efficiency.
    Pitman(PitmanArgs),
}

fn run(cli: &Cli) -> CliResult<Value> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    match &cli.command {
        Command::Test(args) => cmd_test(args, cli.seed),
        Command::NullTable(args) => cmd_null_table(args, cli.seed),
        Command::Smooth(args) => cmd_smooth(args),
        Command::Power(args) => cmd_power(args, cli.seed),
        Command::Are(args) => cmd_are(args),
        Command::Pitman(args) => cmd_pitman(args, cli.seed),
    }
}

/// Prints a JSON document; a closed stdout is not worth a panic.
fn emit(doc: &Value) {
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(doc).expect("JSON"));
}

fn fail(err: CliError) -> ! {
    emit(&err.to_json());
    eprintln!("rankos: {err}");
    std::process::exit(err.exit_code());
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => fail(CliError::Usage(e.to_string().trim_end().to_string())),
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(doc) => {
            emit(&doc);
            std::process::exit(exit::OK);
        }
        Err(e) => fail(e),
    }
}
