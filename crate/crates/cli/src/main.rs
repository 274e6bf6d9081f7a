use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use expertise_cli::pipeline::{self, StageArgs, Summary};
use expertise_cli::StageError;
use expertise_service::AppState;

#[derive(Parser)]
#[command(name = "expertise", version, about = "Topical expertise pipeline")]
struct Cli {
    /// Seed for synthesis, the train/test split and the model header.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Generator config (JSON) for `synth` and `run`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory holding the stage inputs.
    #[arg(long = "in", global = true, default_value = "data")]
    input: PathBuf,
    /// Directory for stage outputs; defaults to the input directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Activity window for `ingest`, in days.
    #[arg(long, global = true, default_value_t = pipeline::DEFAULT_WINDOW_DAYS)]
    window_days: u32,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with planted expertise.
    Synth,
    /// Validate events and apply the activity window.
    Ingest,
    /// Extract raw features from ingested events.
    Extract,
    /// Log-scale and normalize features per (feature, topic).
    Normalize,
    /// Explode ranked lists into pairwise labels and split train/test.
    ExplodeGt,
    /// Fit the two-step model.
    Train,
    /// Score every (user, topic) row.
    Score,
    /// Build the ranked per-topic index.
    Index,
    /// Write evaluation reports.
    Eval,
    /// Serve the index over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Run every stage from `synth` to `eval`.
    Run,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let output = cli.out.clone().unwrap_or_else(|| cli.input.clone());
    let args = StageArgs {
        input: cli.input.clone(),
        output,
        seed: cli.seed,
        window_days: cli.window_days,
        config: cli.config.clone(),
    };
    match dispatch(cli.command, &args) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command, args: &StageArgs) -> Result<Vec<Summary>, StageError> {
    if !matches!(command, Command::Serve { .. }) {
        pipeline::ensure_dir(&args.output)?;
    }
    let one = |r: Result<Summary, StageError>| r.map(|s| vec![s]);
    match command {
        Command::Synth => one(pipeline::synth(args)),
        Command::Ingest => one(pipeline::ingest(args)),
        Command::Extract => one(pipeline::extract(args)),
        Command::Normalize => one(pipeline::normalize(args)),
        Command::ExplodeGt => one(pipeline::explode_gt(args)),
        Command::Train => one(pipeline::train(args)),
        Command::Score => one(pipeline::score(args)),
        Command::Index => one(pipeline::index(args)),
        Command::Eval => one(pipeline::evaluate(args)),
        Command::Run => pipeline::run_all(args),
        Command::Serve { addr } => {
            let index = pipeline::load_index(args)?;
            let dir = args.input.join(expertise_cli::files::INDEX);
            let secret = std::env::var(expertise_service::RELOAD_SECRET_ENV).ok();
            let state = Arc::new(AppState::new(index, Some(dir), secret));
            let rt = tokio::runtime::Runtime::new().map_err(|e| expertise::Error::io("tokio runtime", e))?;
            println!("serving on http://{addr}");
            rt.block_on(expertise_service::serve(addr, state))
                .map_err(|e| expertise::Error::io(addr.to_string(), e))?;
            Ok(vec!["serve: stopped".to_string()])
        }
    }
}
