use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fwopt_cli::{cmd_bench, cmd_complete, cmd_sdpfeas, cmd_solve, CliError, CompleteArgs, SdpArgs, EXIT_OK};

#[derive(Parser)]
#[command(name = "fwopt", version, about = "Projection-free convex optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a TOML-configured problem and write its trace and summary.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Nuclear-norm matrix completion on MovieLens ratings.
    Complete {
        #[arg(long)]
        data: PathBuf,
        /// tab_100k (u.data) or dat_1m (ratings.dat)
        #[arg(long, default_value = "tab_100k")]
        format: String,
        /// table1 (ratings as-is) or normalized (mean offsets removed)
        #[arg(long, default_value = "table1")]
        preset: String,
        #[arg(long)]
        t: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, overrides_with = "no_line_search")]
        line_search: bool,
        #[arg(long)]
        no_line_search: bool,
        #[arg(long)]
        grad_avg: bool,
        /// Fraction of ratings used for training.
        #[arg(long, default_value_t = 0.5)]
        split: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Per-step train/test errors as CSV.
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Approximate feasibility of an SDP problem file.
    Sdpfeas {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        /// Bisection rounds when the file has an objective block.
        #[arg(long, default_value_t = 20)]
        rounds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Run a parameter sweep and write one CSV.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Solve { config } => {
            let (out, code) = cmd_solve(&config)?;
            println!("{}", serde_json::to_string_pretty(&out.summary).expect("serializable"));
            Ok(code)
        }
        Command::Complete {
            data,
            format,
            preset,
            t,
            steps,
            line_search,
            no_line_search,
            grad_avg,
            split,
            seed,
            trace,
            metrics,
            summary,
        } => {
            let args = CompleteArgs {
                format,
                preset,
                t,
                steps,
                line_search: match (line_search, no_line_search) {
                    (true, _) => Some(true),
                    (_, true) => Some(false),
                    _ => None,
                },
                grad_avg,
                split,
                seed,
                trace,
                metrics,
                summary,
                ..CompleteArgs::new(data)
            };
            let out = cmd_complete(&args)?;
            println!("{}", serde_json::to_string_pretty(&out.summary).expect("serializable"));
            Ok(EXIT_OK)
        }
        Command::Sdpfeas { problem, eps, rounds, seed, trace, summary } => {
            let (s, code) = cmd_sdpfeas(&SdpArgs { problem, eps, rounds, seed, trace, summary })?;
            println!("{}", serde_json::to_string_pretty(&s).expect("serializable"));
            Ok(code)
        }
        Command::Bench { config, output } => {
            let path = cmd_bench(&config, output.as_deref())?;
            println!("{}", path.display());
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { fwopt_cli::EXIT_CONFIG } else { EXIT_OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
