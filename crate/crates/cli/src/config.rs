use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sqpredict::features::StackDims;
use sqpredict::model::{ArchConfig, MULTI_HEAD, SINGLE_HEAD};
use sqpredict::trainer::{LossKind, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum HeadMode {
    Single,
    Multi,
}

impl HeadMode {
    pub fn names(self) -> &'static [&'static str] {
        match self {
            HeadMode::Single => &SINGLE_HEAD,
            HeadMode::Multi => &MULTI_HEAD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Mse,
    #[value(name = "bias_aware")]
    BiasAware,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Mse => LossKind::Mse,
            LossArg::BiasAware => LossKind::BiasAware,
        }
    }
}

/// The `[arch]` section. Input geometry comes from the feature files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchSection {
    pub model_dim: usize,
    pub transformer_layers: usize,
    pub attention_heads: usize,
    pub heads: HeadMode,
}

impl Default for ArchSection {
    fn default() -> Self {
        let r = ArchConfig::reference(&SINGLE_HEAD);
        Self {
            model_dim: r.model_dim,
            transformer_layers: r.transformer_layers,
            attention_heads: r.attention_heads,
            heads: HeadMode::Single,
        }
    }
}

impl ArchSection {
    pub fn build(&self, dims: StackDims) -> ArchConfig {
        ArchConfig {
            model_dim: self.model_dim,
            transformer_layers: self.transformer_layers,
            attention_heads: self.attention_heads,
            ..ArchConfig::for_stack(dims, self.heads.names())
        }
    }
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub arch: ArchSection,
    pub train: TrainConfig,
}

/// Flag values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub loss: Option<LossArg>,
    pub heads: Option<HeadMode>,
    pub max_epochs: Option<u64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut config = match path {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                Self::parse(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => Self::default(),
        };
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.train.seed = seed;
        }
        if let Some(loss) = o.loss {
            self.train.loss = loss.into();
        }
        if let Some(heads) = o.heads {
            self.arch.heads = heads;
        }
        if let Some(n) = o.max_epochs {
            self.train.max_epochs = n;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.arch.model_dim == 0 || self.arch.attention_heads == 0 || !self.arch.model_dim.is_multiple_of(self.arch.attention_heads) {
            bail!("arch.model_dim must be a positive multiple of arch.attention_heads");
        }
        if self.arch.transformer_layers == 0 {
            bail!("arch.transformer_layers must be at least 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sqpredict::trainer::Precision;

    #[test]
    fn file_values_and_flag_overrides() {
        let mut c = RunConfig::parse(
            "[arch]\nmodel_dim = 8\nattention_heads = 2\n\n[train]\nseed = 3\nloss = \"mse\"\nprecision = \"f32\"\n",
        )
        .unwrap();
        assert_eq!(c.arch.model_dim, 8);
        assert_eq!(c.arch.transformer_layers, 4);
        assert_eq!(c.train.loss, LossKind::Mse);
        assert_eq!(c.train.precision, Precision::F32);
        c.apply(&Overrides { seed: Some(9), loss: Some(LossArg::BiasAware), heads: Some(HeadMode::Multi), max_epochs: None });
        assert_eq!(c.train.seed, 9);
        assert_eq!(c.train.loss, LossKind::BiasAware);
        assert_eq!(c.arch.build(StackDims::new(3, 8, 8)).head_names.len(), 5);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse("[train]\nlearning_rate = 0.1\n").is_err());
        assert!(RunConfig::parse("[model]\nmodel_dim = 8\n").is_err());
    }

    #[test]
    fn indivisible_heads_rejected() {
        let c = RunConfig::parse("[arch]\nmodel_dim = 10\nattention_heads = 4\n").unwrap();
        assert!(c.validate().is_err());
    }
}
