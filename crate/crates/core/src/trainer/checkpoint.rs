//! WSQC: versioned binary checkpoint container.
//!
//! Layout (little-endian): magic `"WSQC"`, version `u16`, dtype `u8`, section
//! count `u32`, then sections of `tag [u8; 4]`, `len u64`, payload, and finally
//! a CRC-32 of every preceding byte.
//!
//! Sections: `CONF` (JSON architecture and training config), `PARM` (current
//! parameters), `BEST` (best-epoch snapshot, may be empty), `OPTM` (Adam step
//! and moments), `STAT` (scheduler and early-stop counters), `HIST` (per-epoch
//! history).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::loop_::EpochRecord;
use super::schedule::{EarlyStopping, PlateauScheduler};
use super::{TrainConfig, TrainError};
use crate::model::{ArchConfig, ModelParams};
use crate::{DType, Real};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"WSQC";
pub const CHECKPOINT_VERSION: u16 = 1;
const PREAMBLE_LEN: usize = 4 + 2 + 1 + 4;

/// Mutable optimization state carried across epochs.
///
/// Batch order is a pure function of `(seed, epoch)`, so the epoch counter is
/// the whole random-number state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState<S> {
    /// Next epoch to run.
    pub epoch: u64,
    pub global_step: u64,
    pub adam: AdamState<S>,
    pub plateau: PlateauScheduler,
    pub early: EarlyStopping,
    pub best_params: Option<ModelParams<S>>,
    pub best_epoch: Option<u64>,
    pub stopped: bool,
}

impl<S: Real> TrainState<S> {
    pub fn new(config: &TrainConfig, param_count: usize) -> Self {
        Self {
            epoch: 0,
            global_step: 0,
            adam: AdamState::new(param_count),
            plateau: PlateauScheduler::new(config.lr_init, config.plateau_factor, config.plateau_patience),
            early: EarlyStopping::new(config.early_stop_patience),
            best_params: None,
            best_epoch: None,
            stopped: false,
        }
    }

    pub fn best_val_loss(&self) -> f64 {
        self.early.best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<S> {
    pub arch: ArchConfig,
    pub config: TrainConfig,
    pub params: ModelParams<S>,
    pub state: TrainState<S>,
    pub history: Vec<EpochRecord>,
}

impl<S: Real> Checkpoint<S> {
    /// Parameters to use for inference: the best-epoch snapshot when present.
    pub fn best_params(&self) -> &ModelParams<S> {
        self.state.best_params.as_ref().unwrap_or(&self.params)
    }
}

#[derive(Serialize, Deserialize)]
struct ConfigSection {
    arch: ArchConfig,
    config: TrainConfig,
}

fn put_section(out: &mut Vec<u8>, tag: &[u8; 4], payload: &[u8]) {
    out.extend_from_slice(tag);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
}

fn put_values<S: Real>(out: &mut Vec<u8>, values: &[S]) {
    for &v in values {
        v.write_le(out);
    }
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn encode_checkpoint<S: Real>(c: &Checkpoint<S>) -> Vec<u8> {
    let mut sections: Vec<([u8; 4], Vec<u8>)> = Vec::new();

    let conf = serde_json::to_vec(&ConfigSection { arch: c.arch.clone(), config: c.config.clone() })
        .expect("config serializes");
    sections.push((*b"CONF", conf));

    let mut parm = Vec::new();
    put_values(&mut parm, &c.params.to_flat());
    sections.push((*b"PARM", parm));

    let mut best = Vec::new();
    if let (Some(p), Some(e)) = (&c.state.best_params, c.state.best_epoch) {
        put_u64(&mut best, e);
        put_values(&mut best, &p.to_flat());
    }
    sections.push((*b"BEST", best));

    let mut optm = Vec::new();
    put_u64(&mut optm, c.state.adam.step);
    put_values(&mut optm, &c.state.adam.first);
    put_values(&mut optm, &c.state.adam.second);
    sections.push((*b"OPTM", optm));

    let mut stat = Vec::new();
    let s = &c.state;
    put_u64(&mut stat, s.epoch);
    put_u64(&mut stat, s.global_step);
    put_f64(&mut stat, s.plateau.lr);
    put_f64(&mut stat, s.plateau.factor);
    put_u64(&mut stat, s.plateau.patience as u64);
    put_f64(&mut stat, s.plateau.best);
    put_u64(&mut stat, s.plateau.since_improvement as u64);
    put_u64(&mut stat, s.early.patience as u64);
    put_f64(&mut stat, s.early.best);
    put_u64(&mut stat, s.early.since_improvement as u64);
    stat.push(s.stopped as u8);
    sections.push((*b"STAT", stat));

    let mut hist = Vec::new();
    put_u64(&mut hist, c.history.len() as u64);
    for r in &c.history {
        put_u64(&mut hist, r.epoch);
        put_f64(&mut hist, r.lr);
        put_f64(&mut hist, r.train_loss);
        put_f64(&mut hist, r.val_loss);
        hist.push(r.is_best as u8);
    }
    sections.push((*b"HIST", hist));

    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(S::DTYPE.code());
    out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
    for (tag, payload) in &sections {
        put_section(&mut out, tag, payload);
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Self { bytes, pos: 0, what }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], TrainError> {
        if self.bytes.len() - self.pos < n {
            return Err(TrainError::Corrupt(format!("{} section is truncated", self.what)));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64, TrainError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, TrainError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn u8(&mut self) -> Result<u8, TrainError> {
        Ok(self.take(1)?[0])
    }

    fn values<S: Real>(&mut self, n: usize) -> Result<Vec<S>, TrainError> {
        let size = S::DTYPE.size();
        Ok(self.take(n * size)?.chunks_exact(size).map(S::read_le).collect())
    }

    fn finish(&self) -> Result<(), TrainError> {
        if self.pos != self.bytes.len() {
            return Err(TrainError::Corrupt(format!("{} section has {} extra bytes", self.what, self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

fn check_preamble(bytes: &[u8]) -> Result<DType, TrainError> {
    if bytes.len() < 4 {
        return Err(TrainError::Corrupt("file too short".into()));
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if magic != CHECKPOINT_MAGIC {
        return Err(TrainError::BadMagic(magic));
    }
    if bytes.len() < PREAMBLE_LEN + 4 {
        return Err(TrainError::Corrupt("file too short".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CHECKPOINT_VERSION {
        return Err(TrainError::VersionMismatch { found: version, expected: CHECKPOINT_VERSION });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(TrainError::Corrupt("checksum mismatch".into()));
    }
    DType::from_code(bytes[6]).ok_or_else(|| TrainError::Corrupt(format!("unknown dtype code {}", bytes[6])))
}

/// Reads only the scalar type stored in an encoded checkpoint.
pub fn peek_dtype(bytes: &[u8]) -> Result<DType, TrainError> {
    check_preamble(bytes)
}

pub fn decode_checkpoint<S: Real>(bytes: &[u8]) -> Result<Checkpoint<S>, TrainError> {
    let dtype = check_preamble(bytes)?;
    if dtype != S::DTYPE {
        return Err(TrainError::DtypeMismatch { expected: S::DTYPE, found: dtype });
    }
    let body = &bytes[..bytes.len() - 4];
    let count = u32::from_le_bytes(body[7..11].try_into().expect("4 bytes")) as usize;
    let mut cursor = Cursor::new(&body[PREAMBLE_LEN..], "container");
    let mut sections = std::collections::BTreeMap::new();
    for _ in 0..count {
        let tag: [u8; 4] = cursor.take(4)?.try_into().expect("4 bytes");
        let len = cursor.u64()? as usize;
        sections.insert(tag, cursor.take(len)?);
    }
    cursor.finish()?;
    let section = |tag: &[u8; 4]| {
        sections
            .get(tag)
            .copied()
            .ok_or_else(|| TrainError::Corrupt(format!("missing {} section", String::from_utf8_lossy(tag))))
    };

    let conf: ConfigSection = serde_json::from_slice(section(b"CONF")?)
        .map_err(|e| TrainError::Corrupt(format!("config section: {e}")))?;
    conf.arch.validate()?;
    let mut params = ModelParams::<S>::zeros(&conf.arch);
    let n = params.param_count();

    let mut c = Cursor::new(section(b"PARM")?, "PARM");
    params.copy_from_flat(&c.values::<S>(n)?)?;
    c.finish()?;

    let best_bytes = section(b"BEST")?;
    let (best_params, best_epoch) = if best_bytes.is_empty() {
        (None, None)
    } else {
        let mut c = Cursor::new(best_bytes, "BEST");
        let epoch = c.u64()?;
        let mut p = ModelParams::<S>::zeros(&conf.arch);
        p.copy_from_flat(&c.values::<S>(n)?)?;
        c.finish()?;
        (Some(p), Some(epoch))
    };

    let mut c = Cursor::new(section(b"OPTM")?, "OPTM");
    let adam = AdamState { step: c.u64()?, first: c.values(n)?, second: c.values(n)? };
    c.finish()?;

    let mut c = Cursor::new(section(b"STAT")?, "STAT");
    let epoch = c.u64()?;
    let global_step = c.u64()?;
    let plateau = PlateauScheduler {
        lr: c.f64()?,
        factor: c.f64()?,
        patience: c.u64()? as usize,
        best: c.f64()?,
        since_improvement: c.u64()? as usize,
    };
    let early = EarlyStopping { patience: c.u64()? as usize, best: c.f64()?, since_improvement: c.u64()? as usize };
    let stopped = c.u8()? != 0;
    c.finish()?;

    let mut c = Cursor::new(section(b"HIST")?, "HIST");
    let rows = c.u64()? as usize;
    let mut history = Vec::with_capacity(rows.min(1 << 20));
    for _ in 0..rows {
        history.push(EpochRecord {
            epoch: c.u64()?,
            lr: c.f64()?,
            train_loss: c.f64()?,
            val_loss: c.f64()?,
            is_best: c.u8()? != 0,
        });
    }
    c.finish()?;

    Ok(Checkpoint {
        arch: conf.arch,
        config: conf.config,
        params,
        state: TrainState { epoch, global_step, adam, plateau, early, best_params, best_epoch, stopped },
        history,
    })
}

pub fn save_checkpoint<S: Real>(c: &Checkpoint<S>, path: impl AsRef<Path>) -> Result<(), TrainError> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(c)).map_err(|source| TrainError::Io { path: path.display().to_string(), source })
}

pub fn load_checkpoint<S: Real>(path: impl AsRef<Path>) -> Result<Checkpoint<S>, TrainError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| TrainError::Io { path: path.display().to_string(), source })?;
    decode_checkpoint(&bytes)
}
