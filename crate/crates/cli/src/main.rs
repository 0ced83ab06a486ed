use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use tatopt::config::Config;
use tatopt::{run_pipeline, Stage};

#[derive(Parser)]
#[command(
    name = "tatopt",
    version,
    about = "Thermoacoustic source reconstruction and sensor placement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the phantom and record it on the initial sensors.
    Simulate(Common),
    /// Simulate, then reconstruct from the first recording.
    Reconstruct(Common),
    /// Reconstruct, then place new sensors from the energy profile.
    Place(Common),
    /// Full two-step strategy: place, measure again and reconstruct again.
    Pipeline(Common),
}

#[derive(Args)]
struct Common {
    /// INI configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides [run] output).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides [run] seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Additional place/measure/reconstruct rounds (overrides [run] alternate).
    #[arg(long)]
    alternate: Option<usize>,
}

fn run(stage: Stage, args: Common) -> anyhow::Result<()> {
    let mut cfg = Config::load(&args.config).with_context(|| format!("loading {}", args.config.display()))?;
    if let Some(out) = args.out {
        cfg.run.output = out;
    }
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(k) = args.alternate {
        cfg.run.alternate = k;
    }
    let out = cfg.run.output.clone();
    let result = run_pipeline(&cfg, Some(&out), stage)?;
    let errors = &result.report.errors;
    if let Some(tr) = errors.time_reversal {
        println!("time reversal   relative error {tr:.4}");
    }
    for (k, e) in errors.stages.iter().enumerate() {
        println!("stage {}         relative error {e:.4}", k + 1);
    }
    for a in &result.report.a2 {
        println!("round {}         A2 {:.4e} -> {:.4e}", a.round, a.before, a.after);
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, args) = match cli.command {
        Command::Simulate(a) => (Stage::Simulate, a),
        Command::Reconstruct(a) => (Stage::Reconstruct, a),
        Command::Place(a) => (Stage::Place, a),
        Command::Pipeline(a) => (Stage::Full, a),
    };
    match run(stage, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
