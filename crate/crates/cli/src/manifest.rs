//! Simulation manifests: which dataset files were written and the exact reference
//! values of the measured state.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shadowbench::oe_exact::{self, ChargeOperator};
use shadowbench::{ComplexMatrix, QubitRegister};

pub const MANIFEST_SCHEMA: &str = "shadowbench-manifest/1";

/// Charge sectors with smaller weight carry no sector entropy.
const POPULATED: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactValues {
    pub purity: f64,
    /// Rényi-2 OE.
    #[serde(rename = "S2")]
    pub s2: f64,
    /// `-log Tr(𝒮 ρ^{⊗4})`.
    #[serde(rename = "S2_tilde")]
    pub s2_tilde: f64,
    /// `-log Tr ρ²`.
    #[serde(rename = "R2")]
    pub r2: f64,
    /// Excitation-number sector populations.
    pub populations: BTreeMap<i64, f64>,
    #[serde(rename = "S2_q")]
    pub s2_sectors: BTreeMap<i64, f64>,
    /// `‖[Q_A + Q_B, ρ]‖_F`. Above tolerance the sector values are projections of
    /// the realigned state rather than a symmetry resolution.
    pub charge_residual: f64,
}

impl ExactValues {
    /// `rho` is ordered as `A ⊗ B`.
    pub fn compute(rho: &ComplexMatrix, n_a: usize, n_b: usize) -> anyhow::Result<Self> {
        let reg = QubitRegister::bipartite(n_a, n_b);
        let spec = oe_exact::operator_schmidt(rho, &reg)?;
        let s2 = oe_exact::oe_renyi(&spec, 2.0)?;
        let r2 = -spec.purity().ln();
        let charge = ChargeOperator::excitation_number(n_a, n_b);
        let charge_residual = charge.commutator_norm(rho)?;
        let resolved = oe_exact::sector_projected_schmidt(rho, &reg, &charge)?;
        let populations: BTreeMap<i64, f64> = oe_exact::populations(&resolved)?.iter().collect();
        let mut s2_sectors = BTreeMap::new();
        for (&q, &p) in &populations {
            if p > POPULATED {
                s2_sectors.insert(q, oe_exact::sroe(&resolved, q, 2.0)?);
            }
        }
        Ok(Self { purity: spec.purity(), s2, s2_tilde: s2 + 2.0 * r2, r2, populations, s2_sectors, charge_residual })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub t: Option<f64>,
    pub seed: u64,
    pub exact: ExactValues,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub time_unit: String,
    pub root_seed: u64,
    pub charge: String,
    pub config: serde_json::Value,
    pub datasets: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::config::invalid(format!("{}: {e}", path.display())))?;
        let m: Manifest =
            serde_json::from_str(&text).map_err(|e| crate::config::invalid(format!("{}: invalid manifest: {e}", path.display())))?;
        if m.schema != MANIFEST_SCHEMA {
            return Err(crate::config::invalid(format!("{}: unsupported manifest schema {:?}", path.display(), m.schema)));
        }
        Ok(m)
    }

    /// Dataset paths resolved against the manifest location.
    pub fn dataset_paths(&self, manifest_path: &Path) -> Vec<PathBuf> {
        let dir = manifest_path.parent().unwrap_or(Path::new(""));
        self.datasets.iter().map(|d| dir.join(&d.path)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use shadowbench::states;

    #[test]
    fn bell_reference_values() {
        let exact = ExactValues::compute(&states::bell(), 1, 1).unwrap();
        assert!((exact.s2 - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!(exact.r2.abs() < 1e-12);
        assert!((exact.populations.values().sum::<f64>() - 1.0).abs() < 1e-12);
        // Excitation number is not conserved; the realigned Bell state is I/2 with
        // rows split 2:1:1 over q = 0, ±1.
        assert!(exact.charge_residual > 1.0);
        for (q, p) in [(-1, 0.25), (0, 0.5), (1, 0.25)] {
            assert!((exact.populations[&q] - p).abs() < 1e-12);
        }
        assert!((exact.s2_sectors[&0] - 2f64.ln()).abs() < 1e-12);
        assert!(exact.s2_sectors[&1].abs() < 1e-12);
    }
}
