//! Labeled data: manifests, label scales, dataset combination, validation
//! splits, batching, a synthetic generator and distribution summaries.

mod manifest;
mod split;
mod summary;
mod synth;

pub use manifest::{parse_manifest, parse_manifest_reader, write_manifest};
pub use split::{combine_datasets, make_batches, split_validation, CombinedDataset, Split};
pub use summary::{distribution_summary, DistributionRow, DistributionSummary, HISTOGRAM_BINS};
pub use synth::{SynthDataset, SynthExample, SynthSpec};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::features::{load_feature_stack, FeatureError, FeatureStack};
use crate::Real;

/// Label columns in manifest order, paired with the head each one feeds.
pub const LABEL_COLUMNS: [(&str, &str); 5] =
    [("mos", "MOS"), ("noi", "NOI"), ("col", "COL"), ("dis", "DIS"), ("loud", "LOUD")];

/// Lower and upper bound of normalized labels.
pub const NORMALIZED_MIN: f64 = 0.2;
pub const NORMALIZED_MAX: f64 = 1.0;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: missing required column {column:?}")]
    MissingColumn { path: String, column: String },
    #[error("{path}:{line}: column {column:?}: {message}")]
    InvalidField { path: String, line: u64, column: String, message: String },
    #[error("{path}:{line}: row {id:?} has no MOS label")]
    MissingMos { path: String, line: u64, id: String },
    #[error("label {value} outside [{min}, {max}] for scale {scale}")]
    OutOfRange { value: f64, scale: Scale, min: f64, max: f64 },
    #[error("unknown scale {0:?} (expected mos_1_5, mushra_0_10 or normalized)")]
    UnknownScale(String),
    #[error("unknown subset {0:?} (expected train, val or test)")]
    UnknownSubset(String),
    #[error("dataset selection is empty")]
    EmptySelection,
    #[error("unknown dataset tag {0:?}")]
    UnknownTag(String),
    #[error("dataset {tag:?} has {count} training records; at least 10 are needed to carve out a validation split")]
    TooFewRecords { tag: String, count: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("batch size must be at least 1")]
    InvalidBatchSize,
    #[error("record {id:?} has no {head} label")]
    MissingLabel { id: String, head: String },
    #[error("unknown head {0:?}")]
    UnknownHead(String),
    #[error("invalid synthetic dataset spec: {0}")]
    InvalidSynthSpec(String),
    #[error("{context}: {source}")]
    Feature {
        context: String,
        #[source]
        source: FeatureError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

/// Rating scale a raw label is expressed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scale {
    /// Absolute category rating, 1 to 5.
    Mos1To5,
    /// MUSHRA ratings rescaled to 0 to 10.
    Mushra0To10,
    /// Already in `[0.2, 1]`.
    Normalized,
}

impl Scale {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Scale::Mos1To5 => (1.0, 5.0),
            Scale::Mushra0To10 => (0.0, 10.0),
            Scale::Normalized => (NORMALIZED_MIN, NORMALIZED_MAX),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Mos1To5 => "mos_1_5",
            Scale::Mushra0To10 => "mushra_0_10",
            Scale::Normalized => "normalized",
        }
    }

    pub fn check(self, value: f64) -> Result<(), DataError> {
        let (min, max) = self.bounds();
        if value.is_finite() && (min..=max).contains(&value) {
            Ok(())
        } else {
            Err(DataError::OutOfRange { value, scale: self, min, max })
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scale {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "mos_1_5" => Ok(Scale::Mos1To5),
            "mushra_0_10" => Ok(Scale::Mushra0To10),
            "normalized" => Ok(Scale::Normalized),
            other => Err(DataError::UnknownScale(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subset {
    Train,
    Val,
    Test,
}

impl Subset {
    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Train => "train",
            Subset::Val => "val",
            Subset::Test => "test",
        }
    }
}

impl FromStr for Subset {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "train" => Ok(Subset::Train),
            "val" => Ok(Subset::Val),
            "test" => Ok(Subset::Test),
            other => Err(DataError::UnknownSubset(other.to_string())),
        }
    }
}

/// One labeled utterance from a manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub id: String,
    pub feature_path: PathBuf,
    /// Raw labels on `scale`, indexed like [`LABEL_COLUMNS`]; MOS is always present.
    pub labels: [Option<f64>; 5],
    pub scale: Scale,
    pub dataset: String,
    pub subset: Subset,
}

impl DatasetRecord {
    pub fn mos(&self) -> f64 {
        self.labels[0].expect("MOS validated at parse time")
    }

    pub fn normalized_mos(&self) -> f64 {
        normalize_label(self.mos(), self.scale).expect("range validated at parse time")
    }

    /// Normalized label for a head name (`"MOS"`, `"NOI"`, ...).
    pub fn normalized_label(&self, head: &str) -> Result<f64, DataError> {
        let idx = LABEL_COLUMNS
            .iter()
            .position(|(_, h)| *h == head)
            .ok_or_else(|| DataError::UnknownHead(head.to_string()))?;
        let raw = self.labels[idx]
            .ok_or_else(|| DataError::MissingLabel { id: self.id.clone(), head: head.to_string() })?;
        normalize_label(raw, self.scale)
    }
}

/// Maps a raw label to `[0.2, 1]`.
///
/// MOS is divided by 5. MUSHRA (0-10) is first mapped linearly onto 1-5 via
/// `1 + 0.4 v`.
pub fn normalize_label(value: f64, scale: Scale) -> Result<f64, DataError> {
    scale.check(value)?;
    Ok(match scale {
        Scale::Mos1To5 => value / 5.0,
        Scale::Mushra0To10 => (1.0 + 0.4 * value) / 5.0,
        Scale::Normalized => value,
    })
}

/// Maps a normalized label back to the 1-5 MOS scale.
pub fn denormalize(q: f64) -> Result<f64, DataError> {
    Scale::Normalized.check(q)?;
    Ok(5.0 * q)
}

/// Maps a model output in `(0, 1)` to MOS, clamping to the label range first.
pub fn prediction_to_mos(q: f64) -> f64 {
    5.0 * q.clamp(NORMALIZED_MIN, NORMALIZED_MAX)
}

/// A record with its features loaded and labels normalized for the given heads.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<S> {
    pub id: String,
    pub stack: FeatureStack<S>,
    pub targets: Vec<S>,
    pub dataset: String,
}

/// Loads the WSQF features of every record and normalizes its labels.
pub fn load_examples<S: Real>(records: &[DatasetRecord], heads: &[String]) -> Result<Vec<Example<S>>, DataError> {
    records
        .iter()
        .map(|r| {
            let stack = load_feature_stack(&r.feature_path)
                .map_err(|source| DataError::Feature { context: format!("record {:?}", r.id), source })?;
            let targets = heads
                .iter()
                .map(|h| r.normalized_label(h).map(S::of))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Example { id: r.id.clone(), stack, targets, dataset: r.dataset.clone() })
        })
        .collect()
}
