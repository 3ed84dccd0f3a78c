use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::json;
use shadowbench::dataset::{self, DatasetHeader};
use shadowbench::quench::QuenchState;
use shadowbench::shadows::{self, Ensemble};
use shadowbench::{rng, Execution};

use crate::config::{self, invalid, Partition, StateSpec, TimeGrid};
use crate::manifest::{ExactValues, Manifest, ManifestEntry, MANIFEST_SCHEMA};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub state: StateSpec,
    /// Measured blocks in 1-based site labels. Defaults to the two halves.
    pub partition: Option<Partition>,
    /// Evolution times in `1/J0`; static states accept a single time.
    pub times: TimeGrid,
    pub ensemble: Ensemble,
    pub n_u: usize,
    pub n_m: usize,
    pub seed: Option<u64>,
    /// Output prefix: `<prefix>.jsonl` (or `<prefix>.tNNN.jsonl` per time) and
    /// `<prefix>.manifest.json`.
    pub output: PathBuf,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            state: StateSpec::default(),
            partition: None,
            times: TimeGrid::default(),
            ensemble: Ensemble::Haar,
            n_u: 500,
            n_m: 150,
            seed: None,
            output: PathBuf::from("dataset"),
        }
    }
}

pub fn manifest_path(prefix: &Path) -> PathBuf {
    with_suffix(prefix, ".manifest.json")
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn file_name(p: &Path) -> PathBuf {
    PathBuf::from(p.file_name().expect("dataset path has a file name"))
}

pub fn run(cfg: &SimulateConfig, exec: Execution) -> anyhow::Result<Manifest> {
    let root_seed = cfg.seed.ok_or_else(|| invalid("simulate requires a seed (--seed or \"seed\" in the config)"))?;
    if cfg.n_u == 0 || cfg.n_m == 0 {
        return Err(invalid("n_u and n_m must be positive"));
    }
    let n = cfg.state.n_qubits()?;
    let partition = cfg.partition.clone().unwrap_or_else(|| Partition::halves(n));
    partition.validate(n)?;
    let times = cfg.times.points()?;
    let prepared = cfg.state.prepare()?;
    if prepared.is_static() && times.len() > 1 {
        return Err(invalid("times: a static state takes a single time"));
    }
    let sites = partition.sites();
    if let Some(dir) = cfg.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }

    let mut entries = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let state = prepared.at(t)?;
        let rho_ab = config::ordered_marginal(&state, &sites)?;
        let measured = QuenchState::from_density(rho_ab.clone())?;
        let seed = rng::stream(root_seed, &[k as u64]).next_u64();
        let records = shadows::randomized_measurements(&measured, cfg.ensemble, cfg.n_u, cfg.n_m, seed, exec)?;

        let mut header = DatasetHeader::new(sites.len(), cfg.ensemble, cfg.n_u, cfg.n_m);
        header.seed = Some(seed);
        header.metadata = BTreeMap::from([
            ("partition".to_string(), serde_json::to_value(&partition)?),
            ("sites".to_string(), json!(sites)),
            ("state".to_string(), serde_json::to_value(&cfg.state)?),
            ("root_seed".to_string(), json!(root_seed)),
            ("time_index".to_string(), json!(k)),
        ]);
        let t_field = (!prepared.is_static()).then_some(t);
        if let Some(t) = t_field {
            header.metadata.insert("t".to_string(), json!(t));
            header.metadata.insert("time_unit".to_string(), json!("1/J0"));
        }
        let path = if times.len() == 1 { with_suffix(&cfg.output, ".jsonl") } else { with_suffix(&cfg.output, &format!(".t{k:03}.jsonl")) };
        dataset::write_dataset(BufWriter::new(File::create(&path)?), &header, &records)?;
        log::info!("wrote {} ({} records)", path.display(), records.len());

        let exact = ExactValues::compute(&rho_ab, partition.a.len(), partition.b.len())?;
        entries.push(ManifestEntry { path: file_name(&path), t: t_field, seed, exact });
    }

    let manifest = Manifest {
        schema: MANIFEST_SCHEMA.to_string(),
        time_unit: "1/J0".to_string(),
        root_seed,
        charge: "excitation_number".to_string(),
        config: serde_json::to_value(cfg)?,
        datasets: entries,
    };
    let out = manifest_path(&cfg.output);
    std::fs::write(&out, serde_json::to_string_pretty(&manifest)? + "\n")?;
    log::info!("wrote {}", out.display());
    Ok(manifest)
}
