use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ipp_core::harness::{compare_methods, parse_config, run_batch, write_report, BatchResult, ExperimentConfig};
use ipp_core::{Error, Method};

#[derive(Parser)]
#[command(name = "ipp", version, about = "Multi-robot informative path planning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides `base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `runs`.
    #[arg(long)]
    runs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch with the configured method.
    Run(Common),
    /// Run the same seeds under several methods.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "rmcts,mcts,ncmcts")]
        methods: Vec<String>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = parse_config(&common.config).map_err(|e| match e {
        Error::Io { path, source } => Error::Config {
            key: "--config".into(),
            msg: format!("{}: {source}", path.display()),
        },
        e => e,
    })?;
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
    }
    if let Some(runs) = common.runs {
        if runs == 0 {
            return Err(Error::Config {
                key: "--runs".into(),
                msg: "must be >= 1".into(),
            });
        }
        cfg.runs = runs;
    }
    Ok(cfg)
}

fn print_table(batches: &[BatchResult]) {
    println!(
        "{:<8} {:>7} {:>5} {:>5} {:>10} {:>10} {:>8} {:>9}",
        "method", "B", "team", "runs", "MSE", "B_re", "stranded", "seconds"
    );
    for b in batches {
        let r = &b.row;
        println!(
            "{:<8} {:>7} {:>5} {:>5} {:>10.4} {:>10.2} {:>8} {:>9.1}",
            r.method.name(),
            r.budget,
            r.team_size,
            r.runs,
            r.mean_mse,
            r.mean_remaining_budget,
            r.stranded,
            b.wall_clock_seconds
        );
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    let (cfg, batches, out) = match cli.command {
        Command::Run(common) => {
            let cfg = load(&common)?;
            let batch = run_batch(&cfg)?;
            (cfg, vec![batch], common.out)
        }
        Command::Compare { common, methods } => {
            let cfg = load(&common)?;
            let methods = methods
                .iter()
                .map(|m| m.parse::<Method>())
                .collect::<Result<Vec<_>, _>>()?;
            let batches = compare_methods(&cfg, &methods)?;
            (cfg, batches, common.out)
        }
    };
    write_report(&cfg, &batches, &out)?;
    print_table(&batches);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
