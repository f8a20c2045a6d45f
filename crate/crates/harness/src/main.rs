use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use srcfuse_harness::{run_to_dir, ExperimentConfig, ExperimentKind, Format, HarnessError};

#[derive(Parser)]
#[command(name = "srcfuse", version, about = "Run sparse-representation and occupancy-fusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        /// Config file (alternatively `--config`).
        config_file: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        /// Comma-separated seeds overriding the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// List the available experiments.
    ListExperiments,
    /// Check a config file without running it.
    Validate {
        config_file: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn config_path(positional: Option<PathBuf>, flag: Option<PathBuf>) -> Result<PathBuf, HarnessError> {
    positional
        .or(flag)
        .ok_or_else(|| HarnessError::Config("no config file given".into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ListExperiments => {
            for k in ExperimentKind::ALL {
                println!("{:<28}{}", k.name(), k.description());
            }
            Ok(())
        }
        Command::Validate { config_file, config } => config_path(config_file, config)
            .and_then(ExperimentConfig::load)
            .map(|cfg| println!("ok: {}", cfg.experiment.name())),
        Command::Run {
            config_file,
            config,
            out_dir,
            seeds,
            jobs,
            format,
        } => config_path(config_file, config)
            .and_then(ExperimentConfig::load)
            .and_then(|mut cfg| {
                if let Some(s) = seeds {
                    cfg.seeds = s;
                }
                let files = run_to_dir(&cfg, &out_dir, format, jobs)?;
                println!(
                    "{} rows -> {}\nsummary -> {}\nmetadata -> {}",
                    files.rows,
                    files.results.display(),
                    files.summary.display(),
                    files.metadata.display()
                );
                Ok(())
            }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
