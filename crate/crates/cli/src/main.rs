use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gensim_cli::{load_config, run_experiment, run_gradcheck, CliError, Overrides, Stage};

#[derive(Parser)]
#[command(name = "gensim", version, about = "Generative-similarity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate (or load cached) datasets and write their manifests.
    GenData(Common),
    /// Train every configured objective.
    Train(Common),
    /// Evaluate trained checkpoints.
    Eval(Common),
    /// Data, training and evaluation in one go.
    Run(Common),
    /// Linear probes on frozen embeddings (draw only).
    Probe(Common),
    /// Finite-difference gradient check of every loss.
    Gradcheck(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use full-size datasets.
    #[arg(long)]
    paper_scale: bool,
    /// Feed quadrilateral vertex coordinates instead of rasters.
    #[arg(long)]
    vector_input: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.downcast_ref::<CliError>().map_or(1, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<ExitCode> {
    let (stage, args) = match command {
        Command::GenData(a) => (Some(Stage::GenData), a),
        Command::Train(a) => (Some(Stage::Train), a),
        Command::Eval(a) => (Some(Stage::Eval), a),
        Command::Run(a) => (Some(Stage::Run), a),
        Command::Probe(a) => (Some(Stage::Probe), a),
        Command::Gradcheck(a) => (None, a),
    };
    let overrides =
        Overrides { seed: args.seed, out_dir: args.out, paper_scale: args.paper_scale, vector_input: args.vector_input };
    let cfg = load_config(&args.config, &overrides)?;
    let Some(stage) = stage else {
        let (report, ok) = run_gradcheck(&cfg)?;
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(3) });
    };
    let summary = run_experiment(&cfg, stage)?;
    println!("{} {} -> {}", stage.name(), summary.config_hash, summary.out_dir.display());
    Ok(ExitCode::SUCCESS)
}
