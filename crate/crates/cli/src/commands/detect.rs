use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::json;
use shadowbench::dataset;
use shadowbench::shadows::{self, BatchOrder, BatchedShadows, Split};
use shadowbench::Execution;

use crate::config::{self, invalid, Partition, StateSpec};
use crate::output;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectConfig {
    /// Measured dataset; estimates the witness from shadows.
    pub dataset: Option<PathBuf>,
    /// Known state; evaluates the witnesses exactly.
    pub state: Option<StateSpec>,
    pub partition: Option<Partition>,
    /// Evolution time for quench states.
    pub t: f64,
    pub n_prime: usize,
    pub output: Option<PathBuf>,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self { dataset: None, state: None, partition: None, t: 0.0, n_prime: 4, output: None }
    }
}

/// Outcome of `detect`; `flagged` marks an estimate that could not be formed.
pub struct Detection {
    pub report: serde_json::Value,
    pub flagged: bool,
}

pub fn run(cfg: &DetectConfig, exec: Execution) -> anyhow::Result<Detection> {
    let detection = match (&cfg.dataset, &cfg.state) {
        (Some(path), None) => from_dataset(path, cfg, exec)?,
        (None, Some(spec)) => {
            let (rho, reg) = config::bipartite_state(spec, cfg.partition.as_ref(), cfg.t)?;
            let report = shadows::detect_entanglement_exact(&rho, &reg)?;
            Detection {
                report: json!({
                    "source": "exact",
                    "value": report.oe_minus_purity_entropy,
                    "detected": report.detects(),
                    "enhanced_value": report.enhanced_value,
                    "ccnr_margin": report.ccnr_margin,
                }),
                flagged: false,
            }
        }
        _ => return Err(invalid("detect needs exactly one of a dataset and a state")),
    };
    let mut out = output::sink(cfg.output.as_deref())?;
    writeln!(out, "{}", serde_json::to_string_pretty(&detection.report)?)?;
    out.flush()?;
    Ok(detection)
}

fn from_dataset(path: &std::path::Path, cfg: &DetectConfig, exec: Execution) -> anyhow::Result<Detection> {
    let file = File::open(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let (header, records) =
        dataset::read_dataset(BufReader::new(file)).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let partition = match &cfg.partition {
        Some(p) => p.clone(),
        None => match header.metadata.get("partition") {
            Some(v) => serde_json::from_value(v.clone()).map_err(|e| invalid(format!("dataset metadata `partition`: {e}")))?,
            None => Partition::halves(header.n_qubits),
        },
    };
    let sites: Vec<usize> = match header.metadata.get("sites") {
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| invalid(format!("dataset metadata `sites`: {e}")))?,
        None => (1..=header.n_qubits).collect(),
    };
    let qubits = partition
        .sites()
        .iter()
        .map(|s| sites.iter().position(|x| x == s).ok_or_else(|| invalid(format!("partition: site {s} was not measured"))))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let per_unitary = shadows::unitary_shadows(&records, &qubits, exec)?;
    let set = BatchedShadows::new(per_unitary, Split::new(partition.a.len(), partition.b.len()), cfg.n_prime, BatchOrder::Contiguous)
        .map_err(|e| invalid(e.to_string()))?
        .with_execution(exec);
    let report = shadows::detect_entanglement_shadows(&set)?;
    Ok(Detection {
        report: json!({
            "source": "shadows",
            "dataset": path.display().to_string(),
            "value": report.is_valid().then_some(report.value),
            "error": report.jackknife_error,
            "flag": output::flag_name(report.flag),
            "detected": report.is_valid() && report.value > 0.0,
            "n_batches": report.n_batches,
        }),
        flagged: !report.is_valid(),
    })
}
