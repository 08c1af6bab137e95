//! Hardware configuration of the modeled accelerator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Array geometry, buffer capacities, and energy coefficients.
///
/// Defaults describe the reference design point: a 32x32 PE array at 1 GHz
/// with 8x8 IFM tiles, per-row input/weight SRAM of 1K+256 16-bit words,
/// and a 128-word output register file per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    /// Systolic array edge size (the array is `n_pe` x `n_pe`).
    pub n_pe: usize,
    /// IFM tile width.
    pub w_is: usize,
    /// IFM tile height.
    pub h_is: usize,
    /// Per-row input+weight buffer capacity in 16-bit words (one ping-pong phase).
    pub ifm_weight_buffer_words: usize,
    /// Per-column output buffer capacity in 16-bit words (one ping-pong phase).
    pub output_buffer_words: usize,
    /// Computing-core power in 16-bit operation, milliwatts.
    pub core_power_mw_16b: f64,
    /// Computing-core power in 8-bit operation, milliwatts.
    pub core_power_mw_8b: f64,
    /// DRAM access energy per bit, picojoules. Placeholder figure; override
    /// it when absolute energy matters (ratios do not depend on it).
    pub dram_energy_pj_per_bit: f64,
    /// 16-bit words the DMA can deliver per cycle while the array computes.
    pub dram_words_per_cycle: usize,
    pub clock_hz: f64,
    /// Full-chip area used for the frame/s/mm2 report figure.
    pub area_mm2: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            n_pe: 32,
            w_is: 8,
            h_is: 8,
            ifm_weight_buffer_words: 1024 + 256,
            output_buffer_words: 128,
            core_power_mw_16b: 689.0,
            core_power_mw_8b: 729.0,
            dram_energy_pj_per_bit: 20.0,
            dram_words_per_cycle: 32,
            clock_hz: 1.0e9,
            area_mm2: 4.99,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_pe == 0 {
            return Err(Error::Config("n_pe must be >= 1".into()));
        }
        if self.w_is == 0 || self.h_is == 0 {
            return Err(Error::Config("tile sizes must be >= 1".into()));
        }
        if self.dram_words_per_cycle == 0 {
            return Err(Error::Config("dram_words_per_cycle must be >= 1".into()));
        }
        for (name, v) in [
            ("core_power_mw_16b", self.core_power_mw_16b),
            ("core_power_mw_8b", self.core_power_mw_8b),
            ("dram_energy_pj_per_bit", self.dram_energy_pj_per_bit),
            ("clock_hz", self.clock_hz),
            ("area_mm2", self.area_mm2),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be >= 0")));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ArchConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}
