//! Output artifacts: summary types, CSV/JSON writers, tensor hashing.
//!
//! Everything written here is a pure function of the run inputs — no
//! timestamps, no map iteration order — so identical manifests produce
//! byte-identical files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use bitsim_core::dataflow::TrafficReport;
use bitsim_core::metrics::{EnergyReport, RatioTable};
use bitsim_core::systolic::CycleReport;
use bitsim_core::FixedTensor;

use crate::CliError;

/// SHA-256 over the tensor's dims and little-endian element bytes.
pub fn tensor_hash(t: &FixedTensor) -> String {
    let mut h = Sha256::new();
    for &d in t.dims() {
        h.update((d as u64).to_le_bytes());
    }
    h.update([t.bitwidth()]);
    for &v in t.data() {
        h.update(v.to_le_bytes());
    }
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerRow {
    pub index: usize,
    pub kind: String,
    pub n_max: u8,
    pub dataflow: String,
    pub report: CycleReport,
    pub traffic: TrafficReport,
    pub baseline_cycles: u64,
    pub baseline_traffic: TrafficReport,
    pub ofm_hash: String,
}

/// The JSON summary one `simulate` (or `run`) emits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub network: String,
    pub mode: String,
    pub workload: String,
    pub seed: Option<u64>,
    pub total_cycles: u64,
    pub frames_per_second: f64,
    pub total_dram_bits: u64,
    pub baseline_total_cycles: u64,
    pub baseline_total_dram_bits: u64,
    /// Simulator OFMs matched the reference engine on every layer.
    pub golden_match: bool,
    /// Hash of the final layer's OFM.
    pub ofm_hash: String,
    pub layers: Vec<LayerRow>,
}

/// The JSON the `report` stage emits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergySummary {
    pub network: String,
    pub ours: EnergyReport,
    pub baseline: EnergyReport,
    pub ratios: RatioTable,
}

/// Tracks files written by a run so a failed stage can clean up after
/// itself. Writes are atomic (temp file + rename).
pub struct Workspace {
    pub dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Workspace {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        bitsim_core::weightfile::atomic_write(&path, |buf| {
            buf.extend_from_slice(bytes);
            Ok(())
        })
        .map_err(|e| CliError::Runtime(format!("write {}: {e}", path.display())))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Runtime(format!("serialize {name}: {e}")))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Removes everything this run wrote. Used on stage failure.
    pub fn discard(&mut self) {
        for path in self.written.drain(..) {
            let _ = std::fs::remove_file(path);
        }
    }
}

/// Builds a CSV from a header and formatted rows.
pub fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    out
}

pub fn cycles_csv(layers: &[LayerRow]) -> String {
    csv(
        "layer,kind,n_max,dataflow,total_cycles,compute_cycles,fill_drain_cycles,stall_cycles,\
         utilization,gated_steps,dram_bits_ifm,dram_bits_weight,dram_bits_ofm,baseline_cycles",
        layers.iter().map(|l| {
            format!(
                "{},{},{},{},{},{},{},{},{:.6},{},{},{},{},{}",
                l.index,
                l.kind,
                l.n_max,
                l.dataflow,
                l.report.total_cycles,
                l.report.compute_cycles,
                l.report.fill_drain_cycles,
                l.report.stall_cycles,
                l.report.utilization,
                l.report.gated_step_count,
                l.traffic.dram_bits_ifm,
                l.traffic.dram_bits_weight,
                l.traffic.dram_bits_ofm,
                l.baseline_cycles,
            )
        }),
    )
}

pub fn ratios_csv(r: &RatioTable) -> String {
    csv(
        "metric,value",
        [
            format!("speedup,{:.6}", r.speedup),
            format!("power_ratio,{:.6}", r.power_ratio),
            format!("dram_ratio,{:.6}", r.dram_ratio),
            format!("energy_efficiency_ratio,{:.6}", r.energy_efficiency_ratio),
        ],
    )
}
