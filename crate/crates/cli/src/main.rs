use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use sqpredict::features::StackDims;
use sqpredict_cli::{
    cmd_ablate, cmd_evaluate, cmd_predict, cmd_report, cmd_synth, cmd_train, HeadMode, LossArg, Overrides, ReportArgs,
    RunConfig, SynthArgs, TrainArgs,
};

#[derive(Parser)]
#[command(name = "sqpredict", version, about = "Speech quality prediction from layered encoder features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML file with [arch] and [train] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    #[arg(long, value_enum)]
    heads: Option<HeadMode>,
    #[arg(long)]
    max_epochs: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let overrides = Overrides { seed: self.seed, loss: self.loss, heads: self.heads, max_epochs: self.max_epochs };
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on the train subsets of the given manifests.
    Train {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "run")]
        out: PathBuf,
        /// Comma-separated dataset tags to train on (default: all).
        #[arg(long, value_delimiter = ',')]
        datasets: Option<Vec<String>>,
        /// Continue training from a checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Score WSQF feature files.
    Predict {
        checkpoint: PathBuf,
        #[arg(required = true)]
        features: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spearman r and MSE e per test set, plus their average.
    Evaluate {
        checkpoint: PathBuf,
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train on every nonempty combination of dataset tags and evaluate each.
    Ablate {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "ablation")]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Label distributions and score correlation matrices.
    Report {
        #[arg(long = "manifest")]
        manifests: Vec<PathBuf>,
        /// CSV with an id column and numeric score columns.
        #[arg(long = "scores")]
        scores: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
        #[arg(long)]
        svg: bool,
    },
    /// Write a synthetic corpus with known ground truth.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "SYNTH")]
        tag: String,
        #[arg(long, default_value_t = 200)]
        train: usize,
        #[arg(long, default_value_t = 50)]
        test: usize,
        #[arg(long, default_value_t = 0.05)]
        noise_sd: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        world_seed: u64,
        #[arg(long, default_value_t = 3)]
        layers: usize,
        #[arg(long, default_value_t = 8)]
        frames: usize,
        #[arg(long, default_value_t = 8)]
        features: usize,
        /// Labeled quality dimensions (1 = MOS only, 5 = all).
        #[arg(long, default_value_t = 1)]
        dimensions: usize,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { manifests, common, out, datasets, resume, quiet } => {
            let args = TrainArgs { manifests, datasets, config: common.load()?, out, resume, verbose: !quiet };
            let s = cmd_train(&args)?;
            println!(
                "trained {} epochs on {} records; best epoch {:?} (val loss {:.6}); checkpoint {}",
                s.epochs,
                s.train_points,
                s.best_epoch,
                s.best_val_loss,
                s.checkpoint.display()
            );
        }
        Command::Predict { checkpoint, features, out } => {
            let (_, table) = cmd_predict(&checkpoint, &features, out.as_deref())?;
            print!("{table}");
        }
        Command::Evaluate { checkpoint, manifests, out } => {
            let (_, table) = cmd_evaluate(&checkpoint, &manifests, out.as_deref())?;
            print!("{table}");
        }
        Command::Ablate { manifests, common, out, quiet } => {
            let report = cmd_ablate(&manifests, &common.load()?, &out, !quiet)?;
            print!("{}", report.to_csv()?);
        }
        Command::Report { manifests, scores, out, svg } => {
            for f in cmd_report(&ReportArgs { manifests, scores, out, svg })?.files {
                println!("{}", f.display());
            }
        }
        Command::Synth { out, tag, train, test, noise_sd, seed, world_seed, layers, frames, features, dimensions } => {
            let args = SynthArgs {
                out,
                tag,
                train,
                test,
                noise_sd,
                seed,
                world_seed,
                dims: StackDims::new(layers, frames, features),
                dimensions,
            };
            let (manifest, records) = cmd_synth(&args)?;
            println!("wrote {} records to {}", records.len(), manifest.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
