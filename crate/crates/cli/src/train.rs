use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sqpredict::data::{combine_datasets, load_examples, split_validation, DatasetRecord, Split, Subset};
use sqpredict::model::ModelParams;
use sqpredict::trainer::{load_checkpoint, save_checkpoint, Precision, Trainer};
use sqpredict::Real;

use crate::config::RunConfig;
use crate::{ensure_dir, load_records, write_file, CHECKPOINT_FILE, TRAIN_REPORT_FILE};

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub manifests: Vec<PathBuf>,
    /// Dataset tags to train on; all tags with training records when `None`.
    pub datasets: Option<Vec<String>>,
    pub config: RunConfig,
    pub out: PathBuf,
    /// Continue from this checkpoint instead of initializing fresh weights.
    pub resume: Option<PathBuf>,
    pub verbose: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub report: PathBuf,
    /// Training records of the selection before the validation split.
    pub train_points: usize,
    pub epochs: usize,
    pub best_epoch: Option<u64>,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainSummary> {
    let records = load_records(&args.manifests)?;
    let selection = match &args.datasets {
        Some(tags) => tags.iter().cloned().collect(),
        None => training_tags(&records),
    };
    train_selection(&records, &selection, &args.config, &args.out, args.resume.as_deref(), args.verbose)
}

/// Tags that own at least one training record, sorted.
pub fn training_tags(records: &[DatasetRecord]) -> BTreeSet<String> {
    records.iter().filter(|r| r.subset == Subset::Train).map(|r| r.dataset.clone()).collect()
}

pub(crate) fn train_selection(
    records: &[DatasetRecord],
    selection: &BTreeSet<String>,
    config: &RunConfig,
    out: &Path,
    resume: Option<&Path>,
    verbose: bool,
) -> Result<TrainSummary> {
    let combined = combine_datasets(records, selection)?;
    let split = split_validation(&combined, config.train.val_fraction, config.train.seed)?;
    ensure_dir(out)?;
    let mut summary = match config.train.precision {
        Precision::F64 => train_split::<f64>(&split, config, out, resume, verbose),
        Precision::F32 => train_split::<f32>(&split, config, out, resume, verbose),
    }?;
    summary.train_points = combined.total();
    Ok(summary)
}

fn train_split<S: Real>(
    split: &Split,
    config: &RunConfig,
    out: &Path,
    resume: Option<&Path>,
    verbose: bool,
) -> Result<TrainSummary> {
    let heads: Vec<String> = config.arch.heads.names().iter().map(|s| s.to_string()).collect();
    let train = load_examples::<S>(&split.train, &heads)?;
    let val = load_examples::<S>(&split.val, &heads)?;
    let Some(first) = train.first() else { bail!("no training records after the validation split") };
    let arch = config.arch.build(first.stack.dims());

    let mut trainer = match resume {
        Some(path) => {
            let c = load_checkpoint::<S>(path).with_context(|| format!("loading {}", path.display()))?;
            if c.arch != arch {
                bail!("checkpoint {} was trained with a different architecture", path.display());
            }
            let mut t = Trainer::from_checkpoint(c);
            t.set_max_epochs(config.train.max_epochs);
            t
        }
        None => Trainer::new(arch.clone(), config.train.clone(), ModelParams::init(&arch, config.train.seed)?)?,
    };
    let report = trainer.run_with(&train, &val, |r| {
        if verbose {
            eprintln!(
                "epoch {:>4}  lr {:.3e}  train {:.6}  val {:.6}{}",
                r.epoch,
                r.lr,
                r.train_loss,
                r.val_loss,
                if r.is_best { "  *" } else { "" }
            );
        }
    })?;

    let checkpoint = out.join(CHECKPOINT_FILE);
    save_checkpoint(&trainer.checkpoint(), &checkpoint)?;
    let report_path = out.join(TRAIN_REPORT_FILE);
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    write_file(&report_path, &csv)?;
    Ok(TrainSummary {
        checkpoint,
        report: report_path,
        train_points: split.train.len(),
        epochs: report.epochs.len(),
        best_epoch: report.best_epoch,
        best_val_loss: trainer.state().best_val_loss(),
        stopped_early: report.stopped_early,
    })
}
