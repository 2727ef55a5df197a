//! Command implementations behind the `sqpredict` binary.
//!
//! Every command is a plain function so it can be driven from tests as well as
//! from `main`.

pub mod ablate;
pub mod config;
pub mod predict;
pub mod report;
pub mod svg;
pub mod synth;
pub mod train;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sqpredict::data::{parse_manifest, DatasetRecord};

pub use ablate::{ablation_subsets, cmd_ablate, AblationReport, AblationRow};
pub use config::{HeadMode, LossArg, Overrides, RunConfig};
pub use predict::{cmd_evaluate, cmd_predict, PredictionRow};
pub use report::{cmd_report, ReportArgs, ReportOutputs};
pub use synth::{cmd_synth, SynthArgs};
pub use train::{cmd_train, TrainArgs, TrainSummary};

pub const CHECKPOINT_FILE: &str = "checkpoint.wsqc";
pub const TRAIN_REPORT_FILE: &str = "train_report.csv";

/// Parses every manifest and concatenates the records in argument order.
pub fn load_records(manifests: &[PathBuf]) -> Result<Vec<DatasetRecord>> {
    if manifests.is_empty() {
        bail!("at least one manifest is required");
    }
    let mut all = Vec::new();
    for m in manifests {
        all.extend(parse_manifest(m).with_context(|| format!("loading manifest {}", m.display()))?);
    }
    Ok(all)
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}
