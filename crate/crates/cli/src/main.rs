mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::{CliError, EXIT_VALIDATION};

#[derive(Parser, Debug)]
#[command(name = "tabinstruct", version, about = "Instruction datasets and evaluation for LLM table generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dataset registry; overrides `registry` in the config.
    #[arg(long, global = true)]
    pub registry: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample instruction instances and write train/eval/OoD JSONL files.
    BuildDataset(commands::BuildArgs),
    /// Ask a model for table metadata and store it as a sidecar.
    GenMetadata(commands::MetadataArgs),
    /// Send instruction prompts to the endpoint (or a mock).
    Generate(commands::GenerateArgs),
    /// Turn raw model output into typed tables.
    Parse(commands::ParseArgs),
    /// Shape and Trend of a synthetic table against the real one.
    EvalFidelity(commands::FidelityArgs),
    /// Train-on-synthetic, test-on-real utility.
    EvalUtility(commands::UtilityArgs),
    /// Summary tables over a directory of result files.
    Report(commands::ReportArgs),
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError { code: EXIT_VALIDATION, kind: "usage", message: e.render().to_string().trim().to_string() };
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.code);
        }
    };
    let args = argv[1..].to_vec();
    let result = match cli.command {
        Command::BuildDataset(a) => commands::build_dataset(a, args),
        Command::GenMetadata(a) => commands::gen_metadata(a, args),
        Command::Generate(a) => commands::generate(a, args),
        Command::Parse(a) => commands::parse(a, args),
        Command::EvalFidelity(a) => commands::eval_fidelity(a, args),
        Command::EvalUtility(a) => commands::eval_utility(a, args),
        Command::Report(a) => commands::report(a, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.code)
        }
    }
}
