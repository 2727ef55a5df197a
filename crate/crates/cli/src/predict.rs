use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sqpredict::data::{load_examples, prediction_to_mos, DatasetRecord, Subset};
use sqpredict::features::load_feature_stack;
use sqpredict::model::forward;
use sqpredict::objectives::{write_eval_csv, EvalResult};
use sqpredict::trainer::{decode_checkpoint, peek_dtype, predict_all, Checkpoint};
use sqpredict::{DType, Real};

use crate::{ensure_dir, load_records, write_file};

fn read_checkpoint(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading checkpoint {}", path.display()))
}

/// Scores for one feature file.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub id: String,
    /// Normalized sigmoid outputs in head order.
    pub scores: Vec<f64>,
    /// MOS head output mapped to the 1-5 scale.
    pub mos: f64,
}

fn file_id(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

/// Scores WSQF files with a checkpoint's best parameters and renders the CSV
/// table `id,<heads...>,MOS_1_5`. Also writes `predictions.csv` under `out`.
pub fn cmd_predict(checkpoint: &Path, features: &[PathBuf], out: Option<&Path>) -> Result<(Vec<PredictionRow>, String)> {
    if features.is_empty() {
        bail!("no feature files given");
    }
    let bytes = read_checkpoint(checkpoint)?;
    let (heads, rows) = match peek_dtype(&bytes)? {
        DType::F64 => predict_files::<f64>(&decode_checkpoint(&bytes)?, features)?,
        DType::F32 => predict_files::<f32>(&decode_checkpoint(&bytes)?, features)?,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string()];
    header.extend(heads);
    header.push("MOS_1_5".to_string());
    w.write_record(&header)?;
    for r in &rows {
        let mut rec = vec![r.id.clone()];
        rec.extend(r.scores.iter().map(|v| v.to_string()));
        rec.push(r.mos.to_string());
        w.write_record(&rec)?;
    }
    let table = String::from_utf8(w.into_inner()?)?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_file(&dir.join("predictions.csv"), table.as_bytes())?;
    }
    Ok((rows, table))
}

fn predict_files<S: Real>(c: &Checkpoint<S>, features: &[PathBuf]) -> Result<(Vec<String>, Vec<PredictionRow>)> {
    let params = c.best_params();
    let mos_index = mos_head(&c.arch.head_names)?;
    let rows = features
        .iter()
        .map(|path| {
            let stack = load_feature_stack::<S>(path).with_context(|| format!("loading {}", path.display()))?;
            let pred = forward(&stack, params, &c.arch)?;
            let scores: Vec<f64> = pred.scores.iter().map(|s| s.to_f64().expect("finite score")).collect();
            Ok(PredictionRow { id: file_id(path), mos: prediction_to_mos(scores[mos_index]), scores })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((c.arch.head_names.clone(), rows))
}

fn mos_head(heads: &[String]) -> Result<usize> {
    heads.iter().position(|h| h == "MOS").context("checkpoint has no MOS head")
}

/// Test records grouped by dataset tag.
pub(crate) fn test_sets(records: &[DatasetRecord]) -> BTreeMap<String, Vec<DatasetRecord>> {
    let mut sets: BTreeMap<String, Vec<DatasetRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.subset == Subset::Test) {
        sets.entry(r.dataset.clone()).or_default().push(r.clone());
    }
    sets
}

/// Spearman `r` and MSE `e` on the 1-5 scale for every test set.
pub(crate) fn evaluate_sets(
    checkpoint_bytes: &[u8],
    sets: &BTreeMap<String, Vec<DatasetRecord>>,
) -> Result<Vec<(String, EvalResult)>> {
    match peek_dtype(checkpoint_bytes)? {
        DType::F64 => evaluate_with::<f64>(&decode_checkpoint(checkpoint_bytes)?, sets),
        DType::F32 => evaluate_with::<f32>(&decode_checkpoint(checkpoint_bytes)?, sets),
    }
}

fn evaluate_with<S: Real>(
    c: &Checkpoint<S>,
    sets: &BTreeMap<String, Vec<DatasetRecord>>,
) -> Result<Vec<(String, EvalResult)>> {
    let mos_index = mos_head(&c.arch.head_names)?;
    let mut rows = Vec::with_capacity(sets.len());
    for (name, records) in sets {
        if records.is_empty() {
            bail!("test set {name} is empty");
        }
        let examples = load_examples::<S>(records, &[])?;
        let preds = predict_all(&examples, c.best_params(), &c.arch)?;
        let pred_mos: Vec<f64> = preds.iter().map(|p| prediction_to_mos(p[mos_index].to_f64().expect("finite"))).collect();
        let true_mos: Vec<f64> = records.iter().map(|r| 5.0 * r.normalized_mos()).collect();
        let res = EvalResult::compute(&pred_mos, &true_mos).with_context(|| format!("evaluating test set {name}"))?;
        rows.push((name.clone(), res));
    }
    Ok(rows)
}

/// Evaluates a checkpoint on the `test` records of the manifests, one row per
/// dataset tag plus `AVERAGE`. Also writes `eval.csv` under `out`.
pub fn cmd_evaluate(checkpoint: &Path, manifests: &[PathBuf], out: Option<&Path>) -> Result<(Vec<(String, EvalResult)>, String)> {
    let records = load_records(manifests)?;
    let sets = test_sets(&records);
    if sets.is_empty() {
        bail!("the manifests contain no test records");
    }
    let rows = evaluate_sets(&read_checkpoint(checkpoint)?, &sets)?;
    let mut buf = Vec::new();
    write_eval_csv(&rows, &mut buf)?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_file(&dir.join("eval.csv"), &buf)?;
    }
    Ok((rows, String::from_utf8(buf)?))
}
