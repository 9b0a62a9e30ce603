use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use alphapo::report::commands::{self, error_exit_code};
use alphapo::report::{resolve_config, CheckSubject, Overrides};
use alphapo::LossKind;

#[derive(Parser)]
#[command(name = "alphapo", version, about = "Reward-shape experiments for preference optimization losses")]
struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    loss: Option<LossKind>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gradient factors of the two worked toy pairs against their quoted values.
    Illustrations,
    /// log10 gradient magnitude over an (alpha, length) grid.
    Surface,
    /// One gradient-flow trajectory per alpha in the sweep grid.
    SweepAlpha {
        /// JSONL preference dataset; the synthetic dataset is used otherwise.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// A single gradient-flow trajectory.
    Dynamics {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Also write per-example likelihoods at every snapshot.
        #[arg(long)]
        per_example: bool,
    },
    /// Run the invariant suites and print a pass/fail table.
    Check,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { commands::EXIT_INVALID } else { commands::EXIT_OK });
        }
    };
    let overrides = Overrides {
        output_dir: cli.out,
        seed: cli.seed,
        alpha: cli.alpha,
        beta: cli.beta,
        gamma: cli.gamma,
        loss: cli.loss,
    };
    let mut stdout = std::io::stdout();
    let result = resolve_config(cli.config.as_deref(), &overrides).and_then(|cfg| match &cli.command {
        Command::Illustrations => commands::cmd_illustrations(&cfg, &mut stdout),
        Command::Surface => commands::cmd_surface(&cfg, &mut stdout),
        Command::SweepAlpha { dataset } => commands::cmd_sweep_alpha(&cfg, dataset.as_deref(), &mut stdout),
        Command::Dynamics { dataset, per_example } => {
            commands::cmd_dynamics(&cfg, dataset.as_deref(), *per_example, &mut stdout)
        }
        Command::Check => commands::cmd_check(&CheckSubject::default(), &mut stdout),
    });
    match result {
        Ok(status) => ExitCode::from(status.exit_code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e))
        }
    }
}
