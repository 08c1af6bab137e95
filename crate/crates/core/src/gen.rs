//! Deterministic weight and feature-map generation.
//!
//! Trained weights are out of scope, so runs draw them from a seeded
//! stream cipher RNG instead: either uniform over the representable
//! magnitude range, or with a prescribed histogram of nonzero-bit counts.
//! The profiled form exists to reproduce workload imbalance on demand.
//! Same seed, same bytes, every time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::layer::LayerSpec;
use crate::tensor::{FixedTensor, Precision};

#[derive(Debug, Clone, PartialEq)]
pub enum WeightDistribution {
    /// Uniform magnitude over [0, 2^(bits-1) - 1] with a random sign.
    Uniform,
    /// Target histogram over NNZB values; index k is the relative mass of
    /// weights with exactly k nonzero bits.
    NnzbProfiled(Vec<f64>),
}

fn sample_weight(rng: &mut ChaCha8Rng, precision: Precision, dist: &WeightDistribution) -> i32 {
    let mag_bits = precision.bits() as u32 - 1;
    let mag = match dist {
        WeightDistribution::Uniform => rng.gen_range(0..1u32 << mag_bits),
        WeightDistribution::NnzbProfiled(hist) => {
            let total: f64 = hist.iter().sum();
            assert!(total > 0.0, "profile histogram must have mass");
            let mut pick = rng.gen_range(0.0..total);
            let mut k = 0usize;
            for (i, &m) in hist.iter().enumerate() {
                if pick < m {
                    k = i;
                    break;
                }
                pick -= m;
            }
            assert!(
                k as u32 <= mag_bits,
                "profiled NNZB {k} exceeds {mag_bits} magnitude bits"
            );
            // k distinct positions via a partial shuffle
            let mut slots: Vec<u32> = (0..mag_bits).collect();
            let mut mag = 0u32;
            for j in 0..k {
                let pick = rng.gen_range(j..slots.len());
                slots.swap(j, pick);
                mag |= 1 << slots[j];
            }
            mag
        }
    };
    if rng.gen_bool(0.5) {
        -(mag as i32)
    } else {
        mag as i32
    }
}

/// Weight tensor [Co, Ci, Hk, Wk] for one layer, deterministic per seed.
pub fn gen_weights(layer: &LayerSpec, seed: u64, dist: &WeightDistribution) -> FixedTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<i32> = (0..layer.weight_count())
        .map(|_| sample_weight(&mut rng, layer.precision, dist))
        .collect();
    FixedTensor::new(layer.weight_dims().to_vec(), layer.precision.bits(), data)
        .expect("sampled weights fit the precision")
}

/// Feature map of the given dims, uniform over the full signed range.
pub fn gen_ifm(dims: &[usize], precision: Precision, seed: u64) -> FixedTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1f5a_5a5a_0000_0000);
    let lo = precision.min_value() as i32;
    let hi = precision.max_value() as i32;
    let len: usize = dims.iter().product();
    let data: Vec<i32> = (0..len).map(|_| rng.gen_range(lo..=hi)).collect();
    FixedTensor::new(dims.to_vec(), precision.bits(), data).expect("in range by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quant::nnzb;

    #[test]
    fn same_seed_same_tensor() {
        let layer = LayerSpec::conv(4, 4, 8, 8, 3, 3);
        let a = gen_weights(&layer, 42, &WeightDistribution::Uniform);
        let b = gen_weights(&layer, 42, &WeightDistribution::Uniform);
        assert_eq!(a, b);
        let c = gen_weights(&layer, 43, &WeightDistribution::Uniform);
        assert_ne!(a, c);
    }

    #[test]
    fn profiled_mass_at_k_pins_nnzb() {
        for k in [1usize, 3, 7] {
            let mut hist = vec![0.0; k + 1];
            hist[k] = 1.0;
            let layer = LayerSpec::conv(2, 8, 4, 4, 3, 3);
            let w = gen_weights(&layer, 7, &WeightDistribution::NnzbProfiled(hist));
            assert!(w.data().iter().all(|&v| nnzb(v) as usize == k));
        }
    }

    #[test]
    fn uniform_16bit_mean_nnzb_near_half() {
        let layer = LayerSpec::fc(100_000, 1);
        let w = gen_weights(&layer, 1234, &WeightDistribution::Uniform);
        let mean: f64 = w.data().iter().map(|&v| nnzb(v) as f64).sum::<f64>() / w.len() as f64;
        assert!((mean - 7.5).abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn ifm_spans_negative_values() {
        let t = gen_ifm(&[4, 8, 8], Precision::Bits8, 5);
        assert!(t.data().iter().any(|&v| v < 0));
        assert!(t.data().iter().any(|&v| v > 0));
    }
}
