//! Bit-sparsity quantization.
//!
//! Instead of narrowing the bitwidth, quantization here caps the number of
//! nonzero bits in each weight's magnitude: the most significant nonzero
//! bits survive, the rest are dropped (truncation, no rounding). The sign is
//! untouched. `numeric_range` gives the count of magnitudes representable
//! under a given cap, which is what makes this cap cheaper than an equally
//! aggressive bitwidth cut.

use rayon::prelude::*;
use serde::Serialize;

use crate::tensor::FixedTensor;

/// Number of nonzero bits in the magnitude of `w`. The sign does not count.
#[inline]
pub fn nnzb(w: i32) -> u32 {
    w.unsigned_abs().count_ones()
}

/// Keeps the `n_max` most significant nonzero bits of `|w|`, zeroes the
/// rest, and restores the sign. Values already at or under the cap pass
/// through unchanged.
#[inline]
pub fn quantize_weight(w: i32, n_max: u32) -> i32 {
    debug_assert!(n_max >= 1);
    let mag = w.unsigned_abs();
    let mut kept = 0u32;
    let mut remaining = n_max;
    let mut bit = 32 - mag.leading_zeros();
    while remaining > 0 && bit > 0 {
        bit -= 1;
        let mask = 1u32 << bit;
        if mag & mask != 0 {
            kept |= mask;
            remaining -= 1;
        }
    }
    if w < 0 {
        -(kept as i32)
    } else {
        kept as i32
    }
}

/// Per-layer quantization statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantStats {
    pub layer: usize,
    pub n_max: u32,
    /// Histogram of per-weight NNZB before quantization; index = NNZB.
    pub hist_before: Vec<u64>,
    /// Histogram after quantization. No mass above `n_max`.
    pub hist_after: Vec<u64>,
    pub mse: f64,
    pub max_abs_error: u64,
    /// Fraction of weights whose value changed.
    pub modified_fraction: f64,
}

impl QuantStats {
    fn compute(layer: usize, n_max: u32, before: &[i32], after: &[i32], bitwidth: u8) -> Self {
        let bins = bitwidth as usize + 1;
        let mut hist_before = vec![0u64; bins];
        let mut hist_after = vec![0u64; bins];
        let mut sq_err = 0f64;
        let mut max_abs_error = 0u64;
        let mut modified = 0u64;
        for (&b, &a) in before.iter().zip(after) {
            hist_before[nnzb(b) as usize] += 1;
            hist_after[nnzb(a) as usize] += 1;
            let err = (b as i64 - a as i64).unsigned_abs();
            sq_err += (err * err) as f64;
            max_abs_error = max_abs_error.max(err);
            if a != b {
                modified += 1;
            }
        }
        let n = before.len().max(1) as f64;
        Self {
            layer,
            n_max,
            hist_before,
            hist_after,
            mse: sq_err / n,
            max_abs_error,
            modified_fraction: modified as f64 / n,
        }
    }
}

/// Elementwise `quantize_weight` over a weight tensor, plus statistics.
pub fn quantize_tensor(t: &FixedTensor, n_max: u32) -> (FixedTensor, QuantStats) {
    let data: Vec<i32> = t
        .data()
        .par_iter()
        .map(|&w| quantize_weight(w, n_max))
        .collect();
    let stats = QuantStats::compute(0, n_max, t.data(), &data, t.bitwidth());
    let out = FixedTensor::new(t.dims().to_vec(), t.bitwidth(), data)
        .expect("quantization never grows a magnitude");
    (out, stats)
}

/// Count of magnitudes an `n`-bit field can take with at most `n_max`
/// nonzero bits: sum of C(n, i) for i in 0..=n_max. Exact.
pub fn numeric_range(n_max: u32, n: u32) -> u64 {
    assert!(n_max <= n && n <= 32);
    let mut total = 0u64;
    let mut c = 1u64; // C(n, 0)
    for i in 0..=n_max {
        total += c;
        c = c * (n - i) as u64 / (i + 1) as u64;
    }
    total
}

/// Quantizes `t` once per cap in `n_values`, returning the stats of each
/// step. `on_step` runs after each quantization with the stats and the
/// quantized tensor; retraining pipelines hook in there.
pub fn sweep_nnzb_with<F>(t: &FixedTensor, n_values: &[u32], mut on_step: F) -> Vec<QuantStats>
where
    F: FnMut(&QuantStats, &FixedTensor),
{
    assert!(!n_values.is_empty(), "sweep needs at least one n_max");
    n_values
        .iter()
        .map(|&n| {
            assert!(n >= 1);
            let (q, stats) = quantize_tensor(t, n);
            on_step(&stats, &q);
            stats
        })
        .collect()
}

pub fn sweep_nnzb(t: &FixedTensor, n_values: &[u32]) -> Vec<QuantStats> {
    sweep_nnzb_with(t, n_values, |_, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Oracle: rebuild the quantized magnitude from an explicit descending
    /// list of set-bit indices.
    fn mask_oracle(w: i32, n_max: u32) -> i32 {
        let mag = w.unsigned_abs();
        let mut bits: Vec<u32> = (0..32).filter(|&b| mag & (1 << b) != 0).collect();
        bits.sort_unstable_by(|a, b| b.cmp(a));
        let kept: u32 = bits.iter().take(n_max as usize).map(|&b| 1u32 << b).sum();
        if w < 0 {
            -(kept as i32)
        } else {
            kept as i32
        }
    }

    #[test]
    fn nnzb_examples() {
        assert_eq!(nnzb(0), 0);
        assert_eq!(nnzb(93), 5); // 0b1011101
        assert_eq!(nnzb(-93), 5);
        assert_eq!(nnzb(-32768), 1); // magnitude 0x8000
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_weight(93, 4), 92); // keep bits {6,4,3,2}
        assert_eq!(quantize_weight(-93, 3), -88); // keep bits {6,4,3}
        assert_eq!(quantize_weight(80, 4), 80); // nnzb(80)=2, unchanged
        assert_eq!(quantize_weight(-32768, 1), -32768);
    }

    #[test]
    fn quantize_matches_mask_oracle_exhaustive_8bit() {
        for w in -128..=127 {
            for n in 1..=8 {
                assert_eq!(quantize_weight(w, n), mask_oracle(w, n), "w={w} n={n}");
            }
        }
    }

    #[test]
    fn quantize_idempotent_exhaustive_8bit() {
        for w in -128..=127 {
            for n in 1..=8 {
                let q = quantize_weight(w, n);
                assert_eq!(quantize_weight(q, n), q, "w={w} n={n}");
            }
        }
    }

    #[test]
    fn tensor_quantization_and_stats() {
        let t = FixedTensor::new(vec![3], 8, vec![93, -93, 80]).unwrap();
        let (q, stats) = quantize_tensor(&t, 4);
        assert_eq!(q.data(), &[92, -92, 80]);
        assert_eq!(stats.max_abs_error, 1);
        assert!((stats.modified_fraction - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(stats.hist_after.iter().skip(5).sum::<u64>(), 0);

        let z = FixedTensor::zeros(vec![4], 16);
        let (qz, sz) = quantize_tensor(&z, 3);
        assert_eq!(qz, z);
        assert_eq!(sz.mse, 0.0);
    }

    /// Oracle: count n-bit magnitudes with popcount <= n_max directly.
    fn enumerate_range(n_max: u32, n: u32) -> u64 {
        (0u64..1 << n).filter(|v| v.count_ones() <= n_max).count() as u64
    }

    #[test]
    fn numeric_range_table_values() {
        assert_eq!(numeric_range(3, 16), 697);
        assert_eq!(numeric_range(4, 16), 2517);
        assert_eq!(numeric_range(0, 16), 1);
        assert_eq!(numeric_range(16, 16), 65536);
        assert_eq!(numeric_range(13, 16), enumerate_range(13, 16));
    }

    #[test]
    fn numeric_range_matches_enumeration() {
        for n in 1..=12 {
            for n_max in 0..=n {
                assert_eq!(numeric_range(n_max, n), enumerate_range(n_max, n));
            }
        }
    }

    #[test]
    fn sweep_mse_monotone() {
        let t = FixedTensor::new(vec![1], 8, vec![93]).unwrap();
        let stats = sweep_nnzb(&t, &[3, 4]);
        assert_eq!(stats[0].max_abs_error, 5); // 93 -> 88
        assert_eq!(stats[1].max_abs_error, 1); // 93 -> 92

        let data: Vec<i32> = (0..1000)
            .map(|i| ((i * 2654435761u64 as i64) % 65536 - 32768) as i32)
            .collect();
        let t = FixedTensor::new(vec![1000], 16, data).unwrap();
        let stats = sweep_nnzb(&t, &[1, 2, 3, 4, 5, 6, 7, 8]);
        for pair in stats.windows(2) {
            assert!(pair[1].mse <= pair[0].mse);
        }
        let full = sweep_nnzb(&t, &[16]);
        assert_eq!(full[0].mse, 0.0);
    }

    #[test]
    fn sweep_hook_sees_each_step() {
        let t = FixedTensor::new(vec![2], 8, vec![93, 80]).unwrap();
        let mut seen = Vec::new();
        sweep_nnzb_with(&t, &[3, 5], |s, q| seen.push((s.n_max, q.data().to_vec())));
        assert_eq!(seen.len(), 2);
        assert_eq!(seen[0].0, 3);
        assert_eq!(seen[0].1, vec![88, 80]);
    }

    proptest! {
        #[test]
        fn idempotent_and_monotone(w in -32768i32..=32767, n in 1u32..=16) {
            let q = quantize_weight(w, n);
            prop_assert_eq!(quantize_weight(q, n), q);
            prop_assert!(q.unsigned_abs() <= w.unsigned_abs());
            prop_assert!(nnzb(q) <= n);
            if n < 16 {
                // magnitude non-decreasing in n
                prop_assert!(quantize_weight(w, n + 1).unsigned_abs() >= q.unsigned_abs());
            }
            prop_assert_eq!(q, mask_oracle(w, n));
        }

        #[test]
        fn after_histogram_has_no_mass_above_cap(values in prop::collection::vec(-32768i32..=32767, 1..200), n in 1u32..=16) {
            let t = FixedTensor::new(vec![values.len()], 16, values).unwrap();
            let (q, stats) = quantize_tensor(&t, n);
            for &w in q.data() {
                prop_assert!(nnzb(w) <= n);
            }
            prop_assert_eq!(stats.hist_after.iter().skip(n as usize + 1).sum::<u64>(), 0);
        }
    }
}
