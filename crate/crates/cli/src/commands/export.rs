use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::config::invalid;
use crate::manifest::{ExactValues, Manifest};
use crate::output::{self, num, opt, parse_sector_column};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExportConfig {
    pub manifest: Option<PathBuf>,
    /// CSV written by `estimate`; adds estimate, error and flag columns.
    pub estimates: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

/// `(quantity, q)`; `q` is `None` for unresolved quantities.
type Key = (String, Option<i64>);

#[derive(Default)]
struct Estimated {
    value: String,
    error: String,
    flag: String,
}

fn exact_rows(exact: &ExactValues) -> Vec<(Key, f64)> {
    let mut rows = vec![
        (("S2".to_string(), None), exact.s2),
        (("S2_tilde".to_string(), None), exact.s2_tilde),
        (("R2".to_string(), None), exact.r2),
    ];
    rows.extend(exact.populations.iter().map(|(&q, &p)| (("p".to_string(), Some(q)), p)));
    rows.extend(exact.s2_sectors.iter().map(|(&q, &s)| (("S2".to_string(), Some(q)), s)));
    rows
}

fn column_key(name: &str) -> Key {
    match parse_sector_column(name) {
        Some((quantity, q)) => (quantity.to_string(), Some(q)),
        None => (name.to_string(), None),
    }
}

/// Per dataset file name, the estimated cells keyed by quantity.
fn read_estimates(path: &std::path::Path) -> anyhow::Result<BTreeMap<String, BTreeMap<Key, Estimated>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let dataset_col = column("dataset").ok_or_else(|| invalid(format!("{}: no `dataset` column", path.display())))?;
    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let mut cells: BTreeMap<Key, Estimated> = BTreeMap::new();
        for (i, name) in headers.iter().enumerate() {
            let (base, slot) = if let Some(b) = name.strip_suffix("_err") {
                (b, 1)
            } else if let Some(b) = name.strip_suffix("_flag") {
                (b, 2)
            } else {
                (name, 0)
            };
            let key = column_key(base);
            let entry = cells.entry(key).or_default();
            let v = record.get(i).unwrap_or("").to_string();
            match slot {
                0 => entry.value = v,
                1 => entry.error = v,
                _ => entry.flag = v,
            }
        }
        out.insert(record.get(dataset_col).unwrap_or("").to_string(), cells);
    }
    Ok(out)
}

pub fn run(cfg: &ExportConfig) -> anyhow::Result<()> {
    let manifest_path = cfg.manifest.as_deref().ok_or_else(|| invalid("export-plotdata needs a manifest"))?;
    let manifest = Manifest::read(manifest_path)?;
    let estimates = cfg.estimates.as_deref().map(read_estimates).transpose()?.unwrap_or_default();
    let mut w = output::csv_writer(cfg.output.as_deref())?;
    w.write_record(["t", "dataset", "quantity", "q", "exact", "estimate", "error", "flag"])?;
    for entry in &manifest.datasets {
        let name = entry.path.display().to_string();
        let est = estimates.get(&name);
        for ((quantity, q), exact) in exact_rows(&entry.exact) {
            let cell = est.and_then(|e| e.get(&(quantity.clone(), q)));
            w.write_record([
                opt(entry.t),
                name.clone(),
                quantity,
                q.map_or_else(String::new, |q| q.to_string()),
                num(exact),
                cell.map_or_else(String::new, |c| c.value.clone()),
                cell.map_or_else(String::new, |c| c.error.clone()),
                cell.map_or_else(String::new, |c| c.flag.clone()),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_keys() {
        assert_eq!(column_key("S2(q=-1)"), ("S2".to_string(), Some(-1)));
        assert_eq!(column_key("S2_tilde"), ("S2_tilde".to_string(), None));
    }
}
