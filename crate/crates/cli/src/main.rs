//! `icejam`: run pipeline stages from a TOML config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use icejam_core::config::RunConfig;
use icejam_core::pipeline::{run_pipeline, Stage};
use icejam_core::synthetic::{write_dataset, SyntheticOptions};
use icejam_core::Error;

#[derive(Parser)]
#[command(name = "icejam", version, about = "Rare annual flood modelling: features, Firth fits, bootstrap, projection")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gap-fill stations and build the covariate table.
    Features(RunArgs),
    /// Forward stepwise selection by AICc.
    Select(RunArgs),
    /// Fit the projection model.
    Fit(RunArgs),
    /// Parametric bootstrap of the fitted model.
    Bootstrap(RunArgs),
    /// Scenario corridors and wait times.
    Project(RunArgs),
    /// Summary tables.
    Report(RunArgs),
    /// Run the stages given by --stages (default: all).
    Run(RunArgs),
    /// Write a synthetic dataset and config for trying the pipeline.
    Synthetic(SyntheticArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Extra stages to run and write, comma separated, or `all`.
    #[arg(long)]
    stages: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SyntheticArgs {
    /// Directory to write into.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1962)]
    first_year: i32,
    #[arg(long, default_value_t = 2020)]
    last_year: i32,
}

fn error_line(e: &Error) -> String {
    let (stage, inner) = match e {
        Error::Stage { stage, source } => (Some(*stage), source.as_ref()),
        other => (None, other),
    };
    serde_json::json!({
        "error": inner.kind(),
        "stage": stage,
        "message": e.to_string(),
    })
    .to_string()
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    let (stage, args) = match cli.command {
        Command::Synthetic(a) => {
            let opts = SyntheticOptions { seed: a.seed, first_year: a.first_year, last_year: a.last_year, ..Default::default() };
            let d = write_dataset(&a.out, &opts)?;
            println!("{}", d.config_path.display());
            return Ok(());
        }
        Command::Features(a) => (Some(Stage::Features), a),
        Command::Select(a) => (Some(Stage::Select), a),
        Command::Fit(a) => (Some(Stage::Fit), a),
        Command::Bootstrap(a) => (Some(Stage::Bootstrap), a),
        Command::Project(a) => (Some(Stage::Project), a),
        Command::Report(a) => (Some(Stage::Report), a),
        Command::Run(a) => (None, a),
    };
    let mut stages = match (&args.stages, stage) {
        (Some(list), _) => Stage::parse_list(list)?,
        (None, None) => Stage::ALL.to_vec(),
        (None, Some(_)) => Vec::new(),
    };
    stages.extend(stage);
    let mut cfg = RunConfig::load(&args.config)?;
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    let (manifest, written) = run_pipeline(&cfg, &stages, &args.out)?;
    log::info!("config sha256 {}", manifest.config_sha256);
    println!("wrote {} files to {}", written.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}
