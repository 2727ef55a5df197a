use std::collections::BTreeMap;
use std::io::Write;

use super::{DataError, DatasetRecord, NORMALIZED_MAX, NORMALIZED_MIN};

pub const HISTOGRAM_BINS: usize = 20;

/// Statistics of normalized MOS for one dataset tag (or `ALL`).
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionRow {
    pub tag: String,
    pub count: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    /// Counts over 20 equal bins spanning `[0.2, 1]`.
    pub histogram: [usize; HISTOGRAM_BINS],
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSummary {
    /// One row per tag in sorted order, then the combined `ALL` row.
    pub rows: Vec<DistributionRow>,
}

fn bin_of(q: f64) -> usize {
    let width = (NORMALIZED_MAX - NORMALIZED_MIN) / HISTOGRAM_BINS as f64;
    (((q - NORMALIZED_MIN) / width).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

fn row(tag: &str, values: &[f64]) -> DistributionRow {
    let mut histogram = [0; HISTOGRAM_BINS];
    for &q in values {
        histogram[bin_of(q)] += 1;
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = (values.iter().sum::<f64>() / values.len() as f64).clamp(min, max);
    DistributionRow { tag: tag.to_string(), count: values.len(), min, mean, max, histogram }
}

pub fn distribution_summary(records: &[DatasetRecord]) -> Result<DistributionSummary, DataError> {
    if records.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let mut by_tag: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_tag.entry(&r.dataset).or_default().push(r.normalized_mos());
    }
    let mut rows: Vec<DistributionRow> = by_tag.iter().map(|(t, v)| row(t, v)).collect();
    let all: Vec<f64> = records.iter().map(DatasetRecord::normalized_mos).collect();
    rows.push(row("ALL", &all));
    Ok(DistributionSummary { rows })
}

impl DistributionSummary {
    pub fn combined(&self) -> &DistributionRow {
        self.rows.last().expect("ALL row")
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["dataset", "count", "min", "mean", "max"].map(String::from).to_vec();
        header.extend((0..HISTOGRAM_BINS).map(|b| format!("bin_{b:02}")));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.tag.clone(), r.count.to_string(), r.min.to_string(), r.mean.to_string(), r.max.to_string()];
            rec.extend(r.histogram.iter().map(|c| c.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
