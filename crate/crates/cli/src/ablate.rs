use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sqpredict::objectives::{average_eval, EvalResult};

use crate::config::RunConfig;
use crate::predict::{evaluate_sets, test_sets};
use crate::train::{train_selection, training_tags};
use crate::{ensure_dir, load_records, write_file};

/// Every nonempty subset of `tags`, as sorted tag lists.
pub fn ablation_subsets(tags: &[String]) -> Vec<Vec<String>> {
    let sorted: Vec<&String> = tags.iter().collect::<BTreeSet<_>>().into_iter().collect();
    let k = sorted.len();
    (1u64..(1 << k))
        .map(|mask| (0..k).filter(|i| mask & (1 << i) != 0).map(|i| sorted[i].clone()).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub selection: Vec<String>,
    pub train_points: usize,
    /// Per test set, in the report's test-set order.
    pub results: Vec<EvalResult>,
    pub average: EvalResult,
}

impl AblationRow {
    pub fn label(&self) -> String {
        self.selection.join("+")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub testsets: Vec<String>,
    /// Sorted ascending by train points, ties by label.
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["training_data".to_string(), "train_points".to_string()];
        for t in &self.testsets {
            header.push(format!("{t}_r"));
            header.push(format!("{t}_e"));
        }
        header.extend(["average_r".to_string(), "average_e".to_string()]);
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.label(), row.train_points.to_string()];
            for res in &row.results {
                rec.push(res.r.to_string());
                rec.push(res.e.to_string());
            }
            rec.push(row.average.r.to_string());
            rec.push(row.average.e.to_string());
            w.write_record(&rec)?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

/// Trains one model per nonempty subset of the training tags, all with the
/// same seed, and evaluates each on every test set. Each run writes into
/// `out/runs/<tags joined by +>`; the table goes to `out/ablation.csv`.
pub fn cmd_ablate(manifests: &[PathBuf], config: &RunConfig, out: &Path, verbose: bool) -> Result<AblationReport> {
    let records = load_records(manifests)?;
    let tags: Vec<String> = training_tags(&records).into_iter().collect();
    if tags.is_empty() {
        bail!("the manifests contain no training records");
    }
    let sets = test_sets(&records);
    if sets.is_empty() {
        bail!("the manifests contain no test records");
    }
    let runs = out.join("runs");
    ensure_dir(&runs)?;

    let mut rows = Vec::new();
    for selection in ablation_subsets(&tags) {
        let label = selection.join("+");
        if verbose {
            eprintln!("training on {label}");
        }
        let dir = runs.join(&label);
        let chosen: BTreeSet<String> = selection.iter().cloned().collect();
        let summary = train_selection(&records, &chosen, config, &dir, None, false)
            .with_context(|| format!("ablation run {label}"))?;
        let bytes = fs::read(&summary.checkpoint)?;
        let results = evaluate_sets(&bytes, &sets)?;
        let average = average_eval(&results).expect("at least one test set");
        rows.push(AblationRow {
            selection,
            train_points: summary.train_points,
            results: results.into_iter().map(|(_, r)| r).collect(),
            average,
        });
    }
    rows.sort_by(|a, b| a.train_points.cmp(&b.train_points).then_with(|| a.label().cmp(&b.label())));
    let report = AblationReport { testsets: sets.keys().cloned().collect(), rows };
    write_file(&out.join("ablation.csv"), report.to_csv()?.as_bytes())?;
    Ok(report)
}
