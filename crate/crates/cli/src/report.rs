use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use sqpredict::data::{distribution_summary, DistributionSummary};
use sqpredict::objectives::{correlation_matrix, CorrelationMatrix};

use crate::svg::{correlation_svg, distribution_svg};
use crate::{ensure_dir, load_records, write_file};

#[derive(Debug, Clone, Default)]
pub struct ReportArgs {
    pub manifests: Vec<PathBuf>,
    /// CSV tables with an `id` column and one numeric column per score source.
    pub scores: Vec<PathBuf>,
    pub out: PathBuf,
    pub svg: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ReportOutputs {
    pub distribution: Option<DistributionSummary>,
    pub correlation: Option<CorrelationMatrix>,
    pub files: Vec<PathBuf>,
}

type Column = (String, BTreeMap<String, f64>);

fn read_score_table(path: &Path) -> Result<(Vec<String>, Vec<Column>)> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    let id_col = headers.iter().position(|h| h == "id").with_context(|| format!("{}: no id column", path.display()))?;
    let mut columns: Vec<Column> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != id_col)
        .map(|(_, h)| (h.to_string(), BTreeMap::new()))
        .collect();
    let mut order = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let id = rec[id_col].to_string();
        let mut k = 0;
        for (i, field) in rec.iter().enumerate() {
            if i == id_col {
                continue;
            }
            let v: f64 = field.trim().parse().with_context(|| {
                format!("{}: line {}: column {:?} is not a number", path.display(), line + 2, columns[k].0)
            })?;
            columns[k].1.insert(id.clone(), v);
            k += 1;
        }
        order.push(id);
    }
    Ok((order, columns))
}

/// Joins score columns on `id`. Every source must cover exactly the same ids.
fn join_columns(sources: Vec<(Vec<String>, Vec<Column>)>) -> Result<Vec<(String, Vec<f64>)>> {
    let Some((order, _)) = sources.first() else { return Ok(Vec::new()) };
    let order = order.clone();
    let ids: BTreeSet<&String> = order.iter().collect();
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for (source_ids, columns) in &sources {
        if source_ids.len() != order.len() || source_ids.iter().any(|i| !ids.contains(i)) {
            bail!("score sources cover different ids ({} vs {} rows)", order.len(), source_ids.len());
        }
        for (name, values) in columns {
            if out.iter().any(|(n, _)| n == name) {
                bail!("duplicate score column {name:?}");
            }
            out.push((name.clone(), order.iter().map(|id| values[id]).collect()));
        }
    }
    Ok(out)
}

/// Writes `distribution.csv` for manifests and `correlation.csv` for score
/// columns (manifest MOS appears as the `human` column), plus SVG renderings
/// when requested.
pub fn cmd_report(args: &ReportArgs) -> Result<ReportOutputs> {
    if args.manifests.is_empty() && args.scores.is_empty() {
        bail!("report needs at least one manifest or score table");
    }
    ensure_dir(&args.out)?;
    let mut outputs = ReportOutputs::default();
    let mut sources = Vec::new();

    if !args.manifests.is_empty() {
        let records = load_records(&args.manifests)?;
        let summary = distribution_summary(&records)?;
        let mut buf = Vec::new();
        summary.write_csv(&mut buf)?;
        let path = args.out.join("distribution.csv");
        write_file(&path, &buf)?;
        outputs.files.push(path);
        if args.svg {
            let path = args.out.join("distribution.svg");
            write_file(&path, distribution_svg(&summary).as_bytes())?;
            outputs.files.push(path);
        }
        outputs.distribution = Some(summary);
        if !args.scores.is_empty() {
            let order: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
            let human = records.iter().map(|r| (r.id.clone(), 5.0 * r.normalized_mos())).collect();
            sources.push((order, vec![("human".to_string(), human)]));
        }
    }

    for path in &args.scores {
        sources.push(read_score_table(path)?);
    }
    let columns = join_columns(sources)?;
    if !columns.is_empty() {
        let matrix = correlation_matrix(&columns)?;
        let mut buf = Vec::new();
        matrix.write_csv(&mut buf)?;
        let path = args.out.join("correlation.csv");
        write_file(&path, &buf)?;
        outputs.files.push(path);
        if args.svg {
            let path = args.out.join("correlation.svg");
            write_file(&path, correlation_svg(&matrix).as_bytes())?;
            outputs.files.push(path);
        }
        outputs.correlation = Some(matrix);
    }
    Ok(outputs)
}
