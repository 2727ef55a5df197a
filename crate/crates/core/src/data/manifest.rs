//! CSV manifests: `id,feature_path,mos,noi,col,dis,loud,scale,dataset,subset`.
//!
//! Empty label cells mean "absent". Relative feature paths are resolved
//! against the manifest's directory.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::{DataError, DatasetRecord, Scale, Subset, LABEL_COLUMNS};

pub const MANIFEST_COLUMNS: [&str; 10] =
    ["id", "feature_path", "mos", "noi", "col", "dis", "loud", "scale", "dataset", "subset"];

pub fn parse_manifest(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_manifest_reader(file, &path.display().to_string(), &base)
}

/// Parses manifest CSV from any reader; `source` names it in error messages.
pub fn parse_manifest_reader<R: Read>(reader: R, source: &str, base_dir: &Path) -> Result<Vec<DatasetRecord>, DataError> {
    let csv_err = |e: csv::Error| DataError::Csv { path: source.to_string(), source: e };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let mut index = [0usize; 10];
    for (slot, col) in index.iter_mut().zip(MANIFEST_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| DataError::MissingColumn { path: source.to_string(), column: col.to_string() })?;
    }
    let [i_id, i_path, _, _, _, _, _, i_scale, i_dataset, i_subset] = index;

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err)?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(i).unwrap_or("");
        let invalid = |column: &str, message: String| DataError::InvalidField {
            path: source.to_string(),
            line,
            column: column.to_string(),
            message,
        };

        let id = field(i_id).to_string();
        if id.is_empty() {
            return Err(invalid("id", "empty id".into()));
        }
        let scale: Scale = field(i_scale).parse().map_err(|e: DataError| invalid("scale", e.to_string()))?;
        let subset: Subset = field(i_subset).parse().map_err(|e: DataError| invalid("subset", e.to_string()))?;
        let dataset = field(i_dataset).to_string();
        if dataset.is_empty() {
            return Err(invalid("dataset", "empty dataset tag".into()));
        }

        let mut labels = [None; 5];
        for (k, (col, _)) in LABEL_COLUMNS.iter().enumerate() {
            let cell = field(index[2 + k]);
            if cell.is_empty() {
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| invalid(col, format!("not a number: {cell:?}")))?;
            scale.check(value).map_err(|e| invalid(col, format!("row {id:?}: {e}")))?;
            labels[k] = Some(value);
        }
        if labels[0].is_none() {
            return Err(DataError::MissingMos { path: source.to_string(), line, id });
        }

        let raw_path = PathBuf::from(field(i_path));
        if raw_path.as_os_str().is_empty() {
            return Err(invalid("feature_path", "empty path".into()));
        }
        let feature_path = if raw_path.is_relative() { base_dir.join(raw_path) } else { raw_path };
        records.push(DatasetRecord { id, feature_path, labels, scale, dataset, subset });
    }
    Ok(records)
}

/// Writes records as manifest CSV. Feature paths are written as stored.
pub fn write_manifest<W: Write>(records: &[DatasetRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MANIFEST_COLUMNS)?;
    for r in records {
        let mut row = vec![r.id.clone(), r.feature_path.display().to_string()];
        row.extend(r.labels.iter().map(|l| l.map(|v| v.to_string()).unwrap_or_default()));
        row.push(r.scale.as_str().to_string());
        row.push(r.dataset.clone());
        row.push(r.subset.as_str().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
