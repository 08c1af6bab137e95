//! Shared fixtures for the criterion benchmarks.

use bitsim_core::encode::EncodedLayer;
use bitsim_core::gen::{gen_ifm, gen_weights, WeightDistribution};
use bitsim_core::layer::LayerSpec;
use bitsim_core::quant::quantize_tensor;
use bitsim_core::{FixedTensor, Precision};

/// A mid-sized conv layer (AlexNet conv2 shape).
pub fn conv_layer() -> LayerSpec {
    LayerSpec::conv(96, 256, 31, 31, 5, 5).with_n_nzb_max(3)
}

/// A small conv layer for functional-path benchmarks.
pub fn small_conv_layer() -> LayerSpec {
    LayerSpec::conv(16, 16, 16, 16, 3, 3).with_n_nzb_max(3)
}

pub fn weights_for(layer: &LayerSpec, seed: u64) -> FixedTensor {
    gen_weights(layer, seed, &WeightDistribution::Uniform)
}

pub fn encoded_for(layer: &LayerSpec, seed: u64) -> EncodedLayer {
    let (q, _) = quantize_tensor(&weights_for(layer, seed), layer.n_nzb_max as u32);
    EncodedLayer::from_tensor(&q, layer.n_nzb_max).unwrap()
}

pub fn ifm_for(layer: &LayerSpec, seed: u64) -> FixedTensor {
    gen_ifm(&[layer.n_ic, layer.h_i, layer.w_i], Precision::Bits16, seed)
}
