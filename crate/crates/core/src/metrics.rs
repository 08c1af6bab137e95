//! Runtime, energy, and efficiency figures derived from cycle and traffic
//! reports. Core energy scales with runtime at the configured core power;
//! DRAM energy scales with transferred bits at the configured per-bit cost.
//! Everything here is pure arithmetic — identical inputs give identical
//! reports.

use serde::{Deserialize, Serialize};

use crate::arch::ArchConfig;
use crate::dataflow::TrafficReport;
use crate::error::{Error, Result};
use crate::systolic::CycleReport;
use crate::tensor::Precision;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub runtime_s: f64,
    pub core_energy_j: f64,
    pub dram_energy_j: f64,
    pub total_energy_j: f64,
    pub frames_per_joule: f64,
    pub frames_per_s_per_mm2: f64,
}

/// Energy figures from raw totals (one frame's worth of work).
pub fn energy_report_totals(
    total_cycles: u64,
    total_bits: u64,
    arch: &ArchConfig,
    precision: Precision,
) -> EnergyReport {
    let runtime_s = total_cycles as f64 / arch.clock_hz;
    let core_power_w = match precision {
        Precision::Bits16 => arch.core_power_mw_16b,
        Precision::Bits8 => arch.core_power_mw_8b,
    } / 1e3;
    let core_energy_j = core_power_w * runtime_s;
    let dram_energy_j = total_bits as f64 * arch.dram_energy_pj_per_bit * 1e-12;
    let total_energy_j = core_energy_j + dram_energy_j;
    EnergyReport {
        runtime_s,
        core_energy_j,
        dram_energy_j,
        total_energy_j,
        frames_per_joule: if total_energy_j > 0.0 {
            1.0 / total_energy_j
        } else {
            0.0
        },
        frames_per_s_per_mm2: if runtime_s > 0.0 {
            1.0 / runtime_s / arch.area_mm2
        } else {
            0.0
        },
    }
}

pub fn energy_report(
    cycles: &CycleReport,
    traffic: &TrafficReport,
    arch: &ArchConfig,
    precision: Precision,
) -> EnergyReport {
    energy_report_totals(cycles.total_cycles, traffic.total_bits, arch, precision)
}

/// One run's identity and totals, the unit `compare_runs` works on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub network: String,
    pub total_cycles: u64,
    pub total_dram_bits: u64,
    pub energy: EnergyReport,
}

/// Ratios of one run against a baseline of the same network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioTable {
    /// baseline cycles / our cycles.
    pub speedup: f64,
    /// our average power / baseline average power.
    pub power_ratio: f64,
    /// our DRAM bits / baseline DRAM bits.
    pub dram_ratio: f64,
    /// baseline energy / our energy = speedup / power_ratio.
    pub energy_efficiency_ratio: f64,
}

pub fn compare_runs(ours: &RunRecord, baseline: &RunRecord) -> Result<RatioTable> {
    if ours.network != baseline.network {
        return Err(Error::NetworkMismatch {
            ours: ours.network.clone(),
            theirs: baseline.network.clone(),
        });
    }
    let speedup = baseline.total_cycles as f64 / ours.total_cycles as f64;
    let our_power = ours.energy.total_energy_j / ours.energy.runtime_s;
    let base_power = baseline.energy.total_energy_j / baseline.energy.runtime_s;
    let power_ratio = our_power / base_power;
    Ok(RatioTable {
        speedup,
        power_ratio,
        dram_ratio: ours.total_dram_bits as f64 / baseline.total_dram_bits as f64,
        energy_efficiency_ratio: baseline.energy.total_energy_j / ours.energy.total_energy_j,
    })
}
