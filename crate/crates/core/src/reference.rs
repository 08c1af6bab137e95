//! Golden functional models.
//!
//! Three ways to compute a layer that must all agree bit for bit:
//! `conv_golden` (plain integer MACs), `bitserial_mac` (one shift-add per
//! magnitude bit), and the sparse path over encoded weights
//! (`sparse_mac` / `sparse_conv_golden`, shift-adds over position slots
//! with bitmap gating). The timing simulator is checked against these.
//!
//! Partial sums live in a fixed-width accumulator (32-bit for 16-bit
//! operands, 16-bit for 8-bit) that wraps in two's complement; wraps are
//! counted, never hidden. The accumulation order is fixed — input channels,
//! then kernel rows, then kernel columns — so wrap counts are reproducible.

use crate::encode::{EncodedLayer, EncodedWeight};
use crate::error::{Error, Result};
use crate::layer::{output_dims, LayerSpec};
use crate::tensor::FixedTensor;

/// Wraps `v` into the signed two's-complement range of `bits`: keep the low
/// `bits` bits and sign-extend.
#[inline]
pub fn wrap_to_bits(v: i64, bits: u8) -> i64 {
    debug_assert!((1..64).contains(&bits));
    let shift = 64 - bits as u32;
    (v << shift) >> shift
}

/// Fixed-width partial-sum accumulator with wrap counting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Psum {
    value: i64,
    bits: u8,
    overflow_count: u64,
}

impl Psum {
    pub fn new(bits: u8) -> Self {
        Self {
            value: 0,
            bits,
            overflow_count: 0,
        }
    }

    #[inline]
    pub fn add(&mut self, term: i64) {
        let exact = self.value + term;
        self.value = wrap_to_bits(exact, self.bits);
        if self.value != exact {
            self.overflow_count = self.overflow_count.saturating_add(1);
        }
    }

    pub fn value(&self) -> i64 {
        self.value
    }

    pub fn overflow_count(&self) -> u64 {
        self.overflow_count
    }
}

/// Wrap/saturation accounting for one layer evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConvStats {
    pub psum_wraps: u64,
    pub writeback_wraps: u64,
}

/// Output narrowing behavior. The default takes the low bits (wrap);
/// saturation is available but off unless asked for.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConvOptions {
    pub saturate: bool,
}

fn check_conv_shapes(ifm: &FixedTensor, w_dims: &[usize], layer: &LayerSpec) -> Result<()> {
    if ifm.dims() != [layer.n_ic, layer.h_i, layer.w_i] {
        return Err(Error::ShapeMismatch(format!(
            "IFM dims {:?} do not match layer input {}x{}x{}",
            ifm.dims(),
            layer.n_ic,
            layer.h_i,
            layer.w_i
        )));
    }
    if w_dims != layer.weight_dims() {
        return Err(Error::ShapeMismatch(format!(
            "weight dims {:?} do not match layer {:?}",
            w_dims,
            layer.weight_dims()
        )));
    }
    Ok(())
}

fn write_back(psum: &Psum, layer: &LayerSpec, opts: ConvOptions, stats: &mut ConvStats) -> i32 {
    let shifted = psum.value() >> layer.out_shift;
    let bits = layer.precision.bits();
    if opts.saturate {
        let lo = layer.precision.min_value();
        let hi = layer.precision.max_value();
        if shifted < lo || shifted > hi {
            stats.writeback_wraps += 1;
        }
        shifted.clamp(lo, hi) as i32
    } else {
        let wrapped = wrap_to_bits(shifted, bits);
        if wrapped != shifted {
            stats.writeback_wraps += 1;
        }
        wrapped as i32
    }
}

/// Dense integer convolution / GEMV at full per-MAC precision, accumulated
/// in the fixed-width Psum and narrowed to the layer precision on write-out.
pub fn conv_golden(
    ifm: &FixedTensor,
    weights: &FixedTensor,
    layer: &LayerSpec,
) -> Result<FixedTensor> {
    conv_golden_with(ifm, weights, layer, ConvOptions::default()).map(|(t, _)| t)
}

pub fn conv_golden_with(
    ifm: &FixedTensor,
    weights: &FixedTensor,
    layer: &LayerSpec,
    opts: ConvOptions,
) -> Result<(FixedTensor, ConvStats)> {
    check_conv_shapes(ifm, weights.dims(), layer)?;
    let (h_o, w_o) = output_dims(layer)?;
    let psum_bits = layer.precision.psum_bits();
    let mut stats = ConvStats::default();
    let mut out = vec![0i32; layer.n_oc * h_o * w_o];
    for o in 0..layer.n_oc {
        for x in 0..h_o {
            for y in 0..w_o {
                let mut psum = Psum::new(psum_bits);
                for i in 0..layer.n_ic {
                    for a in 0..layer.h_k {
                        for b in 0..layer.w_k {
                            let iv = ifm.at3(i, x * layer.stride + a, y * layer.stride + b) as i64;
                            let wv = weights.at4(o, i, a, b) as i64;
                            psum.add(iv * wv);
                        }
                    }
                }
                stats.psum_wraps += psum.overflow_count();
                out[(o * h_o + x) * w_o + y] = write_back(&psum, layer, opts, &mut stats);
            }
        }
    }
    let t = FixedTensor::new(vec![layer.n_oc, h_o, w_o], layer.precision.bits(), out)?;
    Ok((t, stats))
}

/// One multiply evaluated bit-serially over every magnitude bit of the
/// weight. Cost is always `precision` cycles: the dense baseline spends a
/// cycle per bit whether it is set or not.
pub fn bitserial_mac(i: i64, w: i64, precision: u8) -> (i64, u32) {
    let operand = if w < 0 { -i } else { i };
    let mag = w.unsigned_abs();
    let mut value = 0i64;
    for bit in 0..precision as u32 {
        if mag >> bit & 1 == 1 {
            value += operand << bit;
        }
    }
    (value, precision as u32)
}

/// One multiply evaluated over the encoded weight's position slots. Every
/// slot costs a cycle; bitmap-invalid slots are gated and add zero, so the
/// cost is `n_max` no matter how many bits the weight really has.
pub fn sparse_mac(i: i64, e: &EncodedWeight, n_max: u8) -> (i64, u32) {
    debug_assert_eq!(e.n_max, n_max);
    let operand = if e.sign { -i } else { i };
    let mut value = 0i64;
    for k in 0..n_max as usize {
        if e.bitmap >> k & 1 == 1 {
            value += operand << e.positions[k];
        }
    }
    (value, n_max as u32)
}

/// Convolution over encoded weights: per weight, `n_max` gated shift-add
/// steps into the Psum. Bit-exactly the same outputs as `conv_golden` on
/// the decoded weight tensor, wrap behavior included.
pub fn sparse_conv_golden(
    ifm: &FixedTensor,
    enc: &EncodedLayer,
    layer: &LayerSpec,
) -> Result<FixedTensor> {
    sparse_conv_golden_with(ifm, enc, layer, ConvOptions::default()).map(|(t, _)| t)
}

pub fn sparse_conv_golden_with(
    ifm: &FixedTensor,
    enc: &EncodedLayer,
    layer: &LayerSpec,
    opts: ConvOptions,
) -> Result<(FixedTensor, ConvStats)> {
    check_conv_shapes(ifm, &enc.dims, layer)?;
    if enc.precision != layer.precision {
        return Err(Error::ShapeMismatch(format!(
            "encoded precision {} does not match layer {}",
            enc.precision, layer.precision
        )));
    }
    let (h_o, w_o) = output_dims(layer)?;
    let psum_bits = layer.precision.psum_bits();
    let mut stats = ConvStats::default();
    let mut out = vec![0i32; layer.n_oc * h_o * w_o];
    // weight-major loop: fields fetched once per weight, every psum still
    // receives its terms in (i, a, b) order
    let mut psums = vec![Psum::new(psum_bits); h_o * w_o];
    for o in 0..layer.n_oc {
        psums.fill(Psum::new(psum_bits));
        for i in 0..layer.n_ic {
            for a in 0..layer.h_k {
                for b in 0..layer.w_k {
                    let idx = enc.index(o, i, a, b);
                    let sign = enc.sign(idx);
                    let slots = enc.position_slots(idx);
                    let valid = enc.nnzb_of(idx) as usize;
                    if valid == 0 {
                        continue; // every slot gated, nothing to add
                    }
                    for x in 0..h_o {
                        for y in 0..w_o {
                            let iv = ifm.at3(i, x * layer.stride + a, y * layer.stride + b) as i64;
                            let operand = if sign { -iv } else { iv };
                            let psum = &mut psums[x * w_o + y];
                            // slots beyond `valid` are gated and add nothing
                            for &slot in &slots[..valid] {
                                psum.add(operand << slot);
                            }
                        }
                    }
                }
            }
        }
        for (pi, psum) in psums.iter().enumerate() {
            stats.psum_wraps += psum.overflow_count();
            out[o * h_o * w_o + pi] = write_back(psum, layer, opts, &mut stats);
        }
    }
    let t = FixedTensor::new(vec![layer.n_oc, h_o, w_o], layer.precision.bits(), out)?;
    Ok((t, stats))
}

/// ReLU (when configured) followed by max-pooling (when configured).
pub fn relu_pool(ofm: &FixedTensor, layer: &LayerSpec) -> Result<FixedTensor> {
    let (h_o, w_o) = output_dims(layer)?;
    if ofm.dims() != [layer.n_oc, h_o, w_o] {
        return Err(Error::ShapeMismatch(format!(
            "OFM dims {:?} do not match layer output {}x{}x{}",
            ofm.dims(),
            layer.n_oc,
            h_o,
            w_o
        )));
    }
    let relu = |v: i32| if layer.post_relu { v.max(0) } else { v };
    match layer.pool {
        None => {
            if !layer.post_relu {
                return Ok(ofm.clone());
            }
            let data = ofm.data().iter().map(|&v| relu(v)).collect();
            Ok(FixedTensor::new(ofm.dims().to_vec(), ofm.bitwidth(), data)?)
        }
        Some(p) => {
            if p.window > h_o || p.window > w_o {
                return Err(Error::PoolExceedsOutput {
                    window: p.window,
                    stride: p.stride,
                    h: h_o,
                    w: w_o,
                });
            }
            let h_p = (h_o - p.window) / p.stride + 1;
            let w_p = (w_o - p.window) / p.stride + 1;
            let mut data = Vec::with_capacity(layer.n_oc * h_p * w_p);
            for c in 0..layer.n_oc {
                for x in 0..h_p {
                    for y in 0..w_p {
                        let mut best = i32::MIN;
                        for a in 0..p.window {
                            for b in 0..p.window {
                                best =
                                    best.max(relu(ofm.at3(c, x * p.stride + a, y * p.stride + b)));
                            }
                        }
                        data.push(best);
                    }
                }
            }
            Ok(FixedTensor::new(
                vec![layer.n_oc, h_p, w_p],
                ofm.bitwidth(),
                data,
            )?)
        }
    }
}
