use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shadowbench::dataset::{self, DatasetHeader};
use shadowbench::oe_exact::ChargeOperator;
use shadowbench::shadows::{self, BatchOrder, BatchedShadows, EstimateReport, Renyi2Estimate, Split};
use shadowbench::Execution;

use crate::config::{invalid, Partition};
use crate::manifest::Manifest;
use crate::output::{self, num, report_cells, sector_column};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateConfig {
    pub datasets: Vec<PathBuf>,
    /// Adds every dataset listed in a simulation manifest.
    pub manifest: Option<PathBuf>,
    /// 1-based site labels; defaults to the partition recorded in the dataset.
    pub partition: Option<Partition>,
    /// Batches for the OE and purity.
    pub n_prime_oe: usize,
    /// Batches for populations and sector entropies.
    pub n_prime_sroe: usize,
    pub order: BatchOrder,
    pub jackknife: bool,
    /// CSV path; stdout when absent.
    pub output: Option<PathBuf>,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            manifest: None,
            partition: None,
            n_prime_oe: 4,
            n_prime_sroe: 16,
            order: BatchOrder::Contiguous,
            jackknife: true,
            output: None,
        }
    }
}

pub struct DatasetEstimate {
    pub dataset: String,
    pub t: Option<f64>,
    pub n_u: usize,
    pub n_m: usize,
    pub oe: Renyi2Estimate,
    pub populations: BTreeMap<i64, EstimateReport>,
    pub sectors: BTreeMap<i64, EstimateReport>,
}

impl DatasetEstimate {
    /// True when the OE or one of its parts is flagged.
    pub fn primary_flagged(&self) -> bool {
        [&self.oe.oe, &self.oe.unnormalized_oe, &self.oe.purity_entropy].iter().any(|r| !r.is_valid())
    }
}

/// Dataset qubit indices of `partition`, mapped through the recorded site labels.
fn block_qubits(header: &DatasetHeader, partition: &Partition) -> anyhow::Result<(Vec<usize>, Vec<usize>)> {
    let sites: Vec<usize> = match header.metadata.get("sites") {
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| invalid(format!("dataset metadata `sites`: {e}")))?,
        None => (1..=header.n_qubits).collect(),
    };
    let index = |s: &usize| -> anyhow::Result<usize> {
        sites.iter().position(|x| x == s).ok_or_else(|| invalid(format!("partition: site {s} was not measured (measured {sites:?})")))
    };
    let a = partition.a.iter().map(index).collect::<anyhow::Result<Vec<_>>>()?;
    let b = partition.b.iter().map(index).collect::<anyhow::Result<Vec<_>>>()?;
    Ok((a, b))
}

fn recorded_partition(header: &DatasetHeader) -> anyhow::Result<Option<Partition>> {
    header
        .metadata
        .get("partition")
        .map(|v| serde_json::from_value(v.clone()).map_err(|e| invalid(format!("dataset metadata `partition`: {e}"))))
        .transpose()
}

pub fn estimate_dataset(path: &Path, cfg: &EstimateConfig, exec: Execution) -> anyhow::Result<DatasetEstimate> {
    let file = File::open(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let (header, records) =
        dataset::read_dataset(BufReader::new(file)).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let partition = match (&cfg.partition, recorded_partition(&header)?) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => p,
        (None, None) => Partition::halves(header.n_qubits),
    };
    let (a, b) = block_qubits(&header, &partition)?;
    let qubits: Vec<usize> = a.iter().chain(&b).copied().collect();
    let per_unitary = shadows::unitary_shadows(&records, &qubits, exec)?;
    let split = Split::new(a.len(), b.len());
    let batched = |n_prime: usize| -> anyhow::Result<BatchedShadows> {
        if n_prime > per_unitary.len() {
            return Err(invalid(format!("{}: {} batches requested but only {} unitaries", path.display(), n_prime, per_unitary.len())));
        }
        let set = BatchedShadows::new(per_unitary.clone(), split, n_prime, cfg.order)?.with_execution(exec);
        Ok(if cfg.jackknife { set } else { set.without_jackknife() })
    };
    let oe = shadows::estimate_renyi2_oe(&batched(cfg.n_prime_oe)?)?;
    let sroe_set = batched(cfg.n_prime_sroe)?;
    let charge = ChargeOperator::excitation_number(a.len(), b.len());
    let populations = shadows::estimate_populations(&sroe_set, &charge)?;
    let sectors = shadows::estimate_sroe2(&sroe_set, &charge)?;
    Ok(DatasetEstimate {
        dataset: path.file_name().map_or_else(|| path.display().to_string(), |f| f.to_string_lossy().into_owned()),
        t: header.metadata.get("t").and_then(|v| v.as_f64()),
        n_u: header.n_u,
        n_m: header.n_m,
        oe,
        populations,
        sectors,
    })
}

pub fn dataset_list(cfg: &EstimateConfig) -> anyhow::Result<Vec<PathBuf>> {
    let mut paths = cfg.datasets.clone();
    if let Some(m) = &cfg.manifest {
        paths.extend(Manifest::read(m)?.dataset_paths(m));
    }
    if paths.is_empty() {
        return Err(invalid("estimate needs at least one dataset (positional paths or --manifest)"));
    }
    Ok(paths)
}

pub fn run(cfg: &EstimateConfig, exec: Execution) -> anyhow::Result<Vec<DatasetEstimate>> {
    if cfg.n_prime_oe < 4 || cfg.n_prime_sroe < 4 {
        return Err(invalid("n_prime_oe and n_prime_sroe must be at least 4"));
    }
    let rows = dataset_list(cfg)?.iter().map(|p| estimate_dataset(p, cfg, exec)).collect::<anyhow::Result<Vec<_>>>()?;
    write_csv(&rows, cfg.output.as_deref())?;
    Ok(rows)
}

pub fn write_csv(rows: &[DatasetEstimate], path: Option<&Path>) -> anyhow::Result<()> {
    let charges: BTreeSet<i64> = rows.iter().flat_map(|r| r.populations.keys().copied()).collect();
    let mut w = output::csv_writer(path)?;
    let mut head: Vec<String> = ["dataset", "t[1/J0]", "n_u", "n_m"].map(String::from).to_vec();
    for name in ["S2", "S2_tilde", "R2"] {
        head.extend([name.to_string(), format!("{name}_err"), format!("{name}_flag")]);
    }
    head.push("p_sum".to_string());
    for &q in &charges {
        for name in ["p", "S2"] {
            let col = sector_column(name, q);
            head.extend([col.clone(), format!("{col}_err"), format!("{col}_flag")]);
        }
    }
    w.write_record(&head)?;
    let missing = || [String::new(), String::new(), "empty_sector".to_string()];
    for r in rows {
        let mut rec = vec![r.dataset.clone(), output::opt(r.t), r.n_u.to_string(), r.n_m.to_string()];
        for rep in [&r.oe.oe, &r.oe.unnormalized_oe, &r.oe.purity_entropy] {
            rec.extend(report_cells(rep));
        }
        rec.push(num(r.populations.values().filter(|p| p.is_valid()).map(|p| p.value).sum()));
        for q in &charges {
            rec.extend(r.populations.get(q).map_or_else(missing, report_cells));
            rec.extend(r.sectors.get(q).map_or_else(missing, report_cells));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
