//! Training losses and evaluation statistics.
//!
//! Losses operate on batches of per-head predictions in normalized label
//! space. Metrics (Spearman `r`, MSE `e`) are computed in `f64` on whatever
//! scale the caller passes; evaluation reports `e` on the 1-5 MOS scale.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Real;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("sample {sample} has {found} heads, expected {expected}")]
    HeadMismatch { sample: usize, expected: usize, found: usize },
    #[error("unknown dataset tag {0:?}")]
    UnknownTag(String),
    #[error("dataset {0:?} has no training samples")]
    EmptyDataset(String),
    #[error("correlation undefined: input has {0} values or zero variance")]
    UndefinedCorrelation(usize),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Scalar loss and its gradient with respect to every prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput<S> {
    pub loss: S,
    /// `grad[i][h] = dL / d pred[i][h]`.
    pub grad: Vec<Vec<S>>,
}

fn check_batch<S>(preds: &[Vec<S>], targets: &[Vec<S>]) -> Result<usize, ObjectiveError> {
    if preds.is_empty() {
        return Err(ObjectiveError::EmptyBatch);
    }
    if preds.len() != targets.len() {
        return Err(ObjectiveError::LengthMismatch { left: preds.len(), right: targets.len() });
    }
    let heads = preds[0].len();
    for (i, (p, t)) in preds.iter().zip(targets).enumerate() {
        if p.len() != heads || t.len() != heads {
            return Err(ObjectiveError::HeadMismatch { sample: i, expected: heads, found: p.len().min(t.len()) });
        }
    }
    Ok(heads)
}

/// Per-sample weighting and normalization of a squared-error batch loss.
///
/// Gradients for each sample depend only on that sample's prediction and on
/// batch-level constants, so training can stream samples one at a time through
/// [`BatchLoss::accumulate`] and get bit-identical results to
/// [`mse_loss`] / [`bias_aware_loss`].
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss<S> {
    weights: Option<Vec<S>>,
    count: S,
}

impl<S: Real> BatchLoss<S> {
    pub fn mse(batch_len: usize, heads: usize) -> Self {
        Self { weights: None, count: S::of((batch_len * heads) as f64) }
    }

    pub fn bias_aware(tags: &[&str], sizes: &DatasetSizes, heads: usize) -> Result<Self, ObjectiveError> {
        let weights = bias_aware_weights(tags, sizes)?;
        Ok(Self { count: S::of((weights.len() * heads) as f64), weights: Some(weights) })
    }

    pub fn weight(&self, i: usize) -> S {
        self.weights.as_ref().map_or(S::one(), |w| w[i])
    }

    /// Adds sample `i`'s weighted squared errors to `sum` and returns its
    /// gradient with respect to `pred`.
    pub fn accumulate(&self, i: usize, pred: &[S], target: &[S], sum: &mut S) -> Vec<S> {
        let w = self.weight(i);
        let two = S::of(2.0);
        pred.iter()
            .zip(target)
            .map(|(&p, &t)| {
                let err = p - t;
                *sum += w * err * err;
                two * w * err / self.count
            })
            .collect()
    }

    /// Loss value from the accumulated sum.
    pub fn finish(&self, sum: S) -> S {
        sum / self.count
    }
}

fn run_batch<S: Real>(preds: &[Vec<S>], targets: &[Vec<S>], loss: &BatchLoss<S>) -> LossOutput<S> {
    let mut sum = S::zero();
    let grad = preds
        .iter()
        .zip(targets)
        .enumerate()
        .map(|(i, (p, t))| loss.accumulate(i, p, t, &mut sum))
        .collect();
    LossOutput { loss: loss.finish(sum), grad }
}

/// Mean over samples and heads of `(pred - target)^2`.
pub fn mse_loss<S: Real>(preds: &[Vec<S>], targets: &[Vec<S>]) -> Result<LossOutput<S>, ObjectiveError> {
    let heads = check_batch(preds, targets)?;
    Ok(run_batch(preds, targets, &BatchLoss::mse(preds.len(), heads)))
}

/// Training-set sizes per dataset tag.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSizes {
    counts: BTreeMap<String, usize>,
}

impl DatasetSizes {
    pub fn new(counts: BTreeMap<String, usize>) -> Result<Self, ObjectiveError> {
        if let Some((tag, _)) = counts.iter().find(|(_, &n)| n == 0) {
            return Err(ObjectiveError::EmptyDataset(tag.clone()));
        }
        Ok(Self { counts })
    }

    pub fn from_tags<'a>(tags: impl IntoIterator<Item = &'a str>) -> Self {
        let mut counts = BTreeMap::new();
        for t in tags {
            *counts.entry(t.to_string()).or_insert(0) += 1;
        }
        Self { counts }
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn dataset_count(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, tag: &str) -> Option<usize> {
        self.counts.get(tag).copied()
    }

    pub fn counts(&self) -> &BTreeMap<String, usize> {
        &self.counts
    }

    /// Unnormalized weight `N / (D * N_d)`.
    pub fn weight(&self, tag: &str) -> Result<f64, ObjectiveError> {
        let n_d = self.get(tag).ok_or_else(|| ObjectiveError::UnknownTag(tag.to_string()))?;
        Ok(self.total() as f64 / (self.dataset_count() as f64 * n_d as f64))
    }
}

/// Per-sample weights `N / (D * N_d)`, rescaled to mean 1 over the batch.
pub fn bias_aware_weights<S: Real>(tags: &[&str], sizes: &DatasetSizes) -> Result<Vec<S>, ObjectiveError> {
    let raw = tags.iter().map(|t| sizes.weight(t)).collect::<Result<Vec<_>, _>>()?;
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    Ok(raw.into_iter().map(|w| S::of(w / mean)).collect())
}

/// Squared error where each sample is scaled by the relative size of its
/// source dataset, so small datasets are not drowned out by large ones.
pub fn bias_aware_loss<S: Real>(
    preds: &[Vec<S>],
    targets: &[Vec<S>],
    tags: &[&str],
    sizes: &DatasetSizes,
) -> Result<LossOutput<S>, ObjectiveError> {
    let heads = check_batch(preds, targets)?;
    if tags.len() != preds.len() {
        return Err(ObjectiveError::LengthMismatch { left: preds.len(), right: tags.len() });
    }
    Ok(run_batch(preds, targets, &BatchLoss::bias_aware(tags, sizes, heads)?))
}

fn check_finite(x: &[f64]) -> Result<(), ObjectiveError> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(ObjectiveError::NonFinite(i)),
        None => Ok(()),
    }
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation; errors on fewer than two values or zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, ObjectiveError> {
    if x.len() != y.len() {
        return Err(ObjectiveError::LengthMismatch { left: x.len(), right: y.len() });
    }
    let n = x.len();
    if n < 2 {
        return Err(ObjectiveError::UndefinedCorrelation(n));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(ObjectiveError::UndefinedCorrelation(n));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, ObjectiveError> {
    if x.len() != y.len() {
        return Err(ObjectiveError::LengthMismatch { left: x.len(), right: y.len() });
    }
    check_finite(x)?;
    check_finite(y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

pub fn mse_metric(pred: &[f64], truth: &[f64]) -> Result<f64, ObjectiveError> {
    if pred.len() != truth.len() {
        return Err(ObjectiveError::LengthMismatch { left: pred.len(), right: truth.len() });
    }
    if pred.is_empty() {
        return Err(ObjectiveError::EmptyBatch);
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

/// Spearman `r` and MSE `e` of one test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub r: f64,
    pub e: f64,
    pub n: usize,
}

impl EvalResult {
    pub fn compute(pred_mos: &[f64], true_mos: &[f64]) -> Result<Self, ObjectiveError> {
        Ok(Self { r: spearman(pred_mos, true_mos)?, e: mse_metric(pred_mos, true_mos)?, n: pred_mos.len() })
    }
}

/// Writes `testset,n,r,e` rows followed by an `AVERAGE` row holding the
/// unweighted mean of `r` and of `e`.
pub fn write_eval_csv<W: Write>(rows: &[(String, EvalResult)], out: W) -> Result<(), ObjectiveError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["testset", "n", "r", "e"])?;
    for (name, res) in rows {
        w.write_record([name.clone(), res.n.to_string(), res.r.to_string(), res.e.to_string()])?;
    }
    if let Some(avg) = average_eval(rows) {
        w.write_record(["AVERAGE".to_string(), avg.n.to_string(), avg.r.to_string(), avg.e.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Unweighted mean of `r` and `e` over test sets; `n` is the total count.
pub fn average_eval(rows: &[(String, EvalResult)]) -> Option<EvalResult> {
    if rows.is_empty() {
        return None;
    }
    let k = rows.len() as f64;
    Some(EvalResult {
        r: rows.iter().map(|(_, r)| r.r).sum::<f64>() / k,
        e: rows.iter().map(|(_, r)| r.e).sum::<f64>() / k,
        n: rows.iter().map(|(_, r)| r.n).sum(),
    })
}

/// Pairwise Spearman correlations between named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

pub fn correlation_matrix(columns: &[(String, Vec<f64>)]) -> Result<CorrelationMatrix, ObjectiveError> {
    if let Some((_, first)) = columns.first() {
        if let Some((_, bad)) = columns.iter().find(|(_, c)| c.len() != first.len()) {
            return Err(ObjectiveError::LengthMismatch { left: first.len(), right: bad.len() });
        }
    }
    let k = columns.len();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let r = spearman(&columns[i].1, &columns[j].1)?;
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix { names: columns.iter().map(|(n, _)| n.clone()).collect(), values })
}

impl CorrelationMatrix {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ObjectiveError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["column".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in self.names.iter().zip(&self.values) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_zero_when_exact() {
        let p = vec![vec![0.3f64, 0.9], vec![0.5, 0.5]];
        let out = mse_loss(&p, &p).unwrap();
        assert_eq!(out.loss, 0.0);
        assert!(out.grad.iter().flatten().all(|&g| g == 0.0));
    }

    #[test]
    fn mse_single_sample() {
        let out = mse_loss(&[vec![0.6f64]], &[vec![0.2]]).unwrap();
        assert!((out.loss - 0.16).abs() < 1e-15);
        assert!((out.grad[0][0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn mse_errors() {
        assert!(matches!(mse_loss::<f64>(&[], &[]), Err(ObjectiveError::EmptyBatch)));
        assert!(matches!(
            mse_loss(&[vec![0.5f64, 0.5]], &[vec![0.5]]),
            Err(ObjectiveError::HeadMismatch { .. })
        ));
    }

    #[test]
    fn bias_aware_single_dataset_is_mse() {
        let p = vec![vec![0.3f64], vec![0.7], vec![0.9]];
        let t = vec![vec![0.2f64], vec![0.6], vec![1.0]];
        let sizes = DatasetSizes::from_tags(["A"; 50]);
        let b = bias_aware_loss(&p, &t, &["A"; 3], &sizes).unwrap();
        assert_eq!(b, mse_loss(&p, &t).unwrap());
    }

    #[test]
    fn bias_aware_weights_follow_dataset_sizes() {
        let sizes = DatasetSizes::new([("S".to_string(), 100), ("L".to_string(), 300)].into()).unwrap();
        // N / (D N_d): 400/200 = 2 and 400/600 = 2/3.
        assert!((sizes.weight("S").unwrap() - 2.0).abs() < 1e-15);
        let w = bias_aware_weights::<f64>(&["S", "L"], &sizes).unwrap();
        assert!((w[0] / w[1] - 3.0).abs() < 1e-12);
        assert!((w[0] + w[1] - 2.0).abs() < 1e-12);
        let out = bias_aware_loss(&[vec![0.5f64], vec![0.5]], &[vec![0.7], vec![0.7]], &["S", "L"], &sizes).unwrap();
        assert!((out.grad[0][0] / out.grad[1][0] - 3.0).abs() < 1e-12);
        let zero = bias_aware_loss(&[vec![0.5], vec![0.4]], &[vec![0.5], vec![0.4]], &["S", "L"], &sizes).unwrap();
        assert_eq!(zero.loss, 0.0);
        assert!(matches!(
            bias_aware_loss(&[vec![0.5]], &[vec![0.5]], &["X"], &sizes),
            Err(ObjectiveError::UnknownTag(_))
        ));
    }

    #[test]
    fn spearman_monotone_is_exact() {
        let x: Vec<f64> = (0..17).map(|i| i as f64 * 0.3).collect();
        let up: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let down: Vec<f64> = x.iter().map(|v| -v * v).collect();
        assert_eq!(spearman(&x, &up).unwrap(), 1.0);
        assert_eq!(spearman(&x, &down).unwrap(), -1.0);
    }

    #[test]
    fn spearman_with_ties_by_hand() {
        // ranks x = [1, 2.5, 2.5, 4], y = [1, 3, 2, 4]; mean 2.5 for both.
        // dev x = [-1.5, 0, 0, 1.5], dev y = [-1.5, 0.5, -0.5, 1.5]
        // sxy = 4.5, sxx = 4.5, syy = 5 -> r = 4.5 / sqrt(22.5)
        let r = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 4.5 / 22.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn spearman_errors() {
        assert!(matches!(spearman(&[1.0, 2.0], &[1.0]), Err(ObjectiveError::LengthMismatch { .. })));
        assert!(matches!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(ObjectiveError::UndefinedCorrelation(3))));
        assert!(matches!(spearman(&[1.0], &[1.0]), Err(ObjectiveError::UndefinedCorrelation(1))));
        assert!(matches!(spearman(&[1.0, f64::NAN], &[1.0, 2.0]), Err(ObjectiveError::NonFinite(1))));
    }

    #[test]
    fn mse_metric_cases() {
        assert_eq!(mse_metric(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_metric(&[3.0], &[4.0]).unwrap(), 1.0);
        assert!(mse_metric(&[], &[]).is_err());
    }

    #[test]
    fn average_row() {
        let rows = vec![
            ("a".to_string(), EvalResult { r: 0.8, e: 0.5, n: 10 }),
            ("b".to_string(), EvalResult { r: 1.0, e: 0.1, n: 30 }),
        ];
        let avg = average_eval(&rows).unwrap();
        assert!((avg.r - 0.9).abs() < 1e-15);
        assert!((avg.e - 0.3).abs() < 1e-15);
        let mut buf = Vec::new();
        write_eval_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("testset,n,r,e\n"));
        assert!(text.lines().last().unwrap().starts_with("AVERAGE,40,0.9"));
    }

    #[test]
    fn correlation_matrix_is_symmetric_with_unit_diagonal() {
        let cols = vec![
            ("human".to_string(), vec![1.0, 2.0, 3.0, 4.0, 5.0]),
            ("model".to_string(), vec![1.0, 2.0, 3.0, 4.0, 5.0]),
            ("other".to_string(), vec![2.0, 1.0, 5.0, 3.0, 4.0]),
        ];
        let m = correlation_matrix(&cols).unwrap();
        for i in 0..3 {
            assert_eq!(m.values[i][i], 1.0);
            for j in 0..3 {
                assert_eq!(m.values[i][j], m.values[j][i]);
                assert_eq!(m.values[i][j], spearman(&cols[i].1, &cols[j].1).unwrap());
            }
        }
        assert_eq!(m.values[0][1], 1.0);
        let bad = vec![("a".to_string(), vec![1.0, 2.0]), ("b".to_string(), vec![1.0])];
        assert!(matches!(correlation_matrix(&bad), Err(ObjectiveError::LengthMismatch { .. })));
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("column,human,model,other\n"));
    }
}
