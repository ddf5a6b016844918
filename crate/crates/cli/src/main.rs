use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use coupling_cli::{list_examples, run_file, INPUT_ERROR, TOOL_VERSION};

#[derive(Parser)]
#[command(name = "coupling", version, about = "Checks coupling Dirac structures from scenario files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print its JSON report.
    Check {
        scenario: PathBuf,
        /// Write the report here instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// List the built-in examples.
    Examples { filter: Option<String> },
    /// Print the tool version.
    Version,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("WORKER_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Check { scenario, output } => match run_file(&scenario) {
            Ok(report) => {
                eprint!("{}", report.summary());
                let json = report.to_json();
                match output {
                    Some(path) => {
                        if let Err(e) = std::fs::write(&path, json) {
                            eprintln!("error: {}: {e}", path.display());
                            return ExitCode::from(INPUT_ERROR as u8);
                        }
                    }
                    None => print!("{json}"),
                }
                ExitCode::from(report.exit_code() as u8)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(INPUT_ERROR as u8)
            }
        },
        Command::Examples { filter } => {
            for (name, description) in list_examples(filter.as_deref()) {
                println!("{name:<20} {description}");
            }
            ExitCode::SUCCESS
        }
        Command::Version => {
            println!("coupling {TOOL_VERSION}");
            ExitCode::SUCCESS
        }
    }
}
