use std::path::PathBuf;
use std::process::ExitCode;

use abcdp::config::{ExperimentConfig, Mode};
use abcdp::harness::execute;
use abcdp::plots::{emit_plot_data, PlotKind};
use abcdp::HarnessError;
use clap::{Args, Parser, Subcommand};

/// Differentially private rejection ABC experiments.
#[derive(Parser)]
#[command(name = "abcdp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the mode named in the config.
    Run(RunArgs),
    /// Paired ABCDP / rejection ABC benchmark.
    Benchmark(RunArgs),
    /// Mean flip-probability grid.
    FlipGrid(RunArgs),
    /// Error bounds next to realized paired errors.
    Bounds(RunArgs),
    /// Derive plot-ready CSV files from a results directory.
    EmitPlots(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Replaces `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// `dotted.key=value`; the value is parsed as JSON, else taken as a string.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct PlotArgs {
    /// Directory written by a previous run.
    #[arg(long)]
    results: PathBuf,
    /// fig1, fig2 or posterior_hist.
    #[arg(long)]
    kind: String,
    #[arg(long, default_value = "plots")]
    out: PathBuf,
}

fn run(args: RunArgs, forced: Option<Mode>) -> Result<(), HarnessError> {
    let mut overrides = args.overrides;
    if let Some(seed) = args.seed {
        overrides.push(format!("master_seed={seed}"));
    }
    if let Some(mode) = forced {
        overrides.push(format!("mode={}", mode.as_str()));
    }
    let config = ExperimentConfig::load(&args.config, &overrides)?;
    let done = execute(config, &args.out)?;
    for (setting, ledger) in &done.ledgers {
        let line = serde_json::json!({ "setting": setting, "ledger": ledger });
        println!("{line}");
    }
    for f in &done.files {
        log::info!("wrote {}", args.out.join(f).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a, None),
        Command::Benchmark(a) => run(a, Some(Mode::PairedBenchmark)),
        Command::FlipGrid(a) => run(a, Some(Mode::FlipGrid)),
        Command::Bounds(a) => run(a, Some(Mode::BoundsReport)),
        Command::EmitPlots(a) => a
            .kind
            .parse::<PlotKind>()
            .and_then(|kind| emit_plot_data(&a.results, kind, &a.out))
            .map(|paths| paths.iter().for_each(|p| println!("{}", p.display()))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
