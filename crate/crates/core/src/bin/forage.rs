use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use forage::config::{Overrides, RunConfig, SamplerSelection};
use forage::pipeline;
use forage::samplers::ProposalKind;
use forage::Result;

/// Simulated semantic-fluency retrieval over embedding similarity spaces.
#[derive(Parser)]
#[command(name = "forage", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch embeddings for the vocabulary from the embedding service.
    Embed(Common),
    /// Build transitions from the embeddings and write walk traces.
    Simulate(Common),
    /// Compute IRT statistics, switch profiles and the deviation regression.
    Analyze(Common),
    /// Project the embeddings to 2-D with t-SNE.
    Project(Common),
    /// Print the rounded report after checking artifact provenance.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    walks: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// random_walk, metropolis_hastings or both.
    #[arg(long)]
    sampler: Option<SamplerSelection>,
    /// uniform or softmax (Metropolis-Hastings only).
    #[arg(long)]
    proposal: Option<ProposalKind>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Switch-profile radius R.
    #[arg(long)]
    window: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        cfg.apply(&Overrides {
            temperature: self.temperature,
            steps: self.steps,
            walks: self.walks,
            seed: self.seed,
            sampler: self.sampler,
            proposal: self.proposal,
            lambda: self.lambda,
            window: self.window,
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Embed(c) => {
            let path = pipeline::cmd_embed(&c.load()?)?;
            println!("{}", path.display());
        }
        Command::Simulate(c) => {
            for path in pipeline::cmd_simulate(&c.load()?)? {
                println!("{}", path.display());
            }
        }
        Command::Analyze(c) => {
            let cfg = c.load()?;
            let report = pipeline::cmd_analyze(&cfg)?;
            print!("{}", pipeline::render_report(&report));
        }
        Command::Project(c) => {
            let path = pipeline::cmd_project(&c.load()?)?;
            println!("{}", path.display());
        }
        Command::Report(c) => print!("{}", pipeline::cmd_report(&c.load()?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
