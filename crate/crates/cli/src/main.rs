use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use parafis_cli::{cmd_fit, cmd_replay, cmd_run, fit_table, CliError, Overrides, RunReport};

#[derive(Parser)]
#[command(name = "parafis", version, about = "Drift benchmark runner for evolving fuzzy classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of shuffled repeats, overriding the config.
    #[arg(long)]
    repeats: Option<usize>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides { out: self.out.clone(), seed: self.seed, repeats: self.repeats }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every model with live drift detection.
    Run(RunArgs),
    /// Run every model with structural changes replayed from traces.
    Replay {
        #[command(flatten)]
        run: RunArgs,
        /// A trace file (single repeat) or a directory of repeat_<r>.trace files.
        #[arg(long)]
        trace: PathBuf,
    },
    /// Fit the reactivity model to each phase of an exported curve.
    Fit {
        /// CSV with a `smoothed` or `smoothed_score` column.
        record: PathBuf,
        /// Exclusive phase ends, e.g. 2000,5000,8000.
        #[arg(long, value_delimiter = ',')]
        boundaries: Option<Vec<usize>>,
        /// Where to write the fit CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn report(r: &RunReport) {
    println!("{:<12} {:>9} {:>10} {:>8}", "config", "<S+smin>", "<tau>", "<acc>");
    for row in &r.summary {
        println!(
            "{:<12} {:>9.4} {:>10.1} {:>8.4}",
            row.config,
            row.mean_steady_state(),
            row.mean_tau(),
            row.mean_acc
        );
    }
    println!("results written to {}", r.out_dir.display());
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => report(&cmd_run(&args.config, &args.overrides())?),
        Command::Replay { run, trace } => report(&cmd_replay(&run.config, &trace, &run.overrides())?),
        Command::Fit { record, boundaries, out } => {
            let r = cmd_fit(&record, boundaries.as_deref(), out.as_deref())?;
            print!("{}", fit_table(&r.row));
            println!("fits written to {}", r.csv_path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
