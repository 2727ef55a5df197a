use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use sqpredict::data::{DatasetRecord, Subset, SynthSpec};
use sqpredict::features::StackDims;

/// Parameters of a synthetic corpus written as WSQF files plus a manifest.
#[derive(Debug, Clone)]
pub struct SynthArgs {
    pub out: PathBuf,
    pub tag: String,
    pub train: usize,
    pub test: usize,
    pub noise_sd: f64,
    pub seed: u64,
    pub world_seed: u64,
    pub dims: StackDims,
    pub dimensions: usize,
}

impl SynthArgs {
    pub fn new(out: &Path, tag: &str, train: usize, test: usize) -> Self {
        Self {
            out: out.to_path_buf(),
            tag: tag.to_string(),
            train,
            test,
            noise_sd: 0.05,
            seed: 0,
            world_seed: 0,
            dims: StackDims::new(3, 8, 8),
            dimensions: 1,
        }
    }
}

/// Generates the corpus; the manifest is `<out>/manifest.csv`.
pub fn cmd_synth(args: &SynthArgs) -> Result<(PathBuf, Vec<DatasetRecord>)> {
    if args.train + args.test == 0 {
        bail!("nothing to generate");
    }
    let spec = SynthSpec::new(args.train + args.test, args.dims, args.noise_sd, args.seed)
        .with_dataset(&args.tag)
        .with_world_seed(args.world_seed)
        .with_dimensions(args.dimensions);
    let train = args.train;
    let records = spec
        .generate()?
        .write(&args.out, "manifest.csv", |i| if i < train { Subset::Train } else { Subset::Test })?;
    Ok((args.out.join("manifest.csv"), records))
}
