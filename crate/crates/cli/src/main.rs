use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use invariance_cli::{aggregate_exit, demo, run_bytes, run_scenario, run_suite, summary, Options, Report, DEMOS, EXIT_SCHEMA};

#[derive(Parser)]
#[command(name = "invariance", version, about = "Form-invariance and frame-indifference checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Override the scenario tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON report to this path.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Exit 1 when any leg fails.
    #[arg(long)]
    strict: bool,
    /// Leave out runtime and timestamp.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Check {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run every `*.scn` file of a directory.
    Suite {
        dir: PathBuf,
        /// Number of scenarios run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run a shipped scenario; `list` prints the names.
    Demo {
        name: String,
        #[command(flatten)]
        common: Common,
    },
}

fn options(c: &Common) -> Result<Options, String> {
    if let Some(t) = c.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(format!("--tol must be positive, found {t}"));
        }
    }
    Ok(Options { tol: c.tol, seed: c.seed, strict: c.strict, no_timestamp: c.no_timestamp })
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    text.push('\n');
    fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn single(report: Report, json: Option<&Path>) -> i32 {
    print!("{}", report.render());
    if let Some(p) = json {
        if let Err(e) = write_json(p, &report) {
            eprintln!("error: {e}");
            return invariance_cli::EXIT_EXECUTION;
        }
    }
    report.exit_code
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Check { common, .. } | Command::Suite { common, .. } | Command::Demo { common, .. } => common.clone(),
    };
    let opts = match options(&common) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_SCHEMA as u8);
        }
    };
    let json = common.json.as_deref();
    let code = match &cli.command {
        Command::Check { file, .. } => single(run_scenario(file, &opts), json),
        Command::Demo { name, .. } if name == "list" => {
            for (n, _) in DEMOS {
                println!("{n}");
            }
            0
        }
        Command::Demo { name, .. } => match demo(name) {
            Some(text) => single(run_bytes(&format!("{name}.scn"), text.as_bytes(), &opts), json),
            None => {
                eprintln!("error: unknown demo `{name}`; try `invariance demo list`");
                EXIT_SCHEMA
            }
        },
        Command::Suite { dir, jobs, .. } => match run_suite(dir, &opts, *jobs) {
            Ok(reports) => {
                for r in reports.iter().filter(|r| r.exit_code != 0) {
                    print!("{}", r.render());
                }
                print!("{}", summary(&reports));
                match json.map(|p| write_json(p, &reports)).transpose() {
                    Ok(_) => aggregate_exit(&reports),
                    Err(e) => {
                        eprintln!("error: {e}");
                        invariance_cli::EXIT_EXECUTION
                    }
                }
            }
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", dir.display());
                EXIT_SCHEMA
            }
        },
    };
    ExitCode::from(code as u8)
}
