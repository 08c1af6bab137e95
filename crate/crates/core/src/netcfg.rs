//! Network configuration files.
//!
//! Plain TOML, one `[[layer]]` table per layer with fields mirroring
//! `LayerSpec`. `precision` and `n_nzb_max` may be given per layer or once
//! at the top level; `n_nzb_max_8b` records the recommended cap when the
//! same network runs in 8-bit mode. Shape tables of real networks carry
//! pre-padded input extents and set `chained = false` (branching and
//! padding make consecutive rows independent).
//!
//! Shape tables for AlexNet, VGG-16, ResNet-50, GoogleNet, and Yolo-v3 are
//! bundled, plus a tiny chained `smoke` network for end-to-end runs.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::layer::{LayerKind, LayerSpec, NetworkSpec, PoolSpec};
use crate::tensor::Precision;

#[derive(Debug, Deserialize)]
struct LayerFile {
    kind: String,
    n_ic: usize,
    n_oc: usize,
    h_i: usize,
    w_i: usize,
    h_k: usize,
    w_k: usize,
    #[serde(default = "one")]
    stride: usize,
    n_nzb_max: Option<u8>,
    precision: Option<u8>,
    #[serde(default)]
    post_relu: bool,
    pool: Option<PoolFile>,
    #[serde(default)]
    out_shift: u8,
}

#[derive(Debug, Deserialize)]
struct PoolFile {
    window: usize,
    stride: usize,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
struct NetworkFile {
    name: String,
    input: [usize; 3],
    #[serde(default = "yes")]
    chained: bool,
    precision: Option<u8>,
    n_nzb_max: Option<u8>,
    n_nzb_max_8b: Option<u8>,
    #[serde(rename = "layer")]
    layers: Vec<LayerFile>,
}

/// A parsed network config plus its 8-bit quantization hint.
#[derive(Debug, Clone)]
pub struct LoadedNetwork {
    pub spec: NetworkSpec,
    pub n_nzb_max_8b: Option<u8>,
}

impl LoadedNetwork {
    /// Re-targets every layer to the given precision. Moving to 8-bit
    /// switches the cap to the config's `n_nzb_max_8b` (or clamps to 8).
    pub fn with_precision(mut self, precision: Precision) -> Self {
        for layer in &mut self.spec.layers {
            if layer.precision == precision {
                continue;
            }
            layer.precision = precision;
            if precision == Precision::Bits8 {
                layer.n_nzb_max = self.n_nzb_max_8b.unwrap_or(layer.n_nzb_max).min(8);
            }
        }
        self
    }

    /// Overrides the NNZB cap on every layer.
    pub fn with_n_max(mut self, n_max: u8) -> Self {
        for layer in &mut self.spec.layers {
            layer.n_nzb_max = n_max;
        }
        self
    }
}

pub fn parse_network(text: &str) -> Result<LoadedNetwork> {
    let file: NetworkFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let default_precision = file.precision.unwrap_or(16);
    let default_n_max = file.n_nzb_max.unwrap_or(4);
    let mut layers = Vec::with_capacity(file.layers.len());
    for (idx, l) in file.layers.iter().enumerate() {
        let kind = match l.kind.as_str() {
            "conv" => LayerKind::Conv,
            "fc" => LayerKind::Fc,
            other => {
                return Err(Error::Config(format!(
                    "layer {idx}: unknown kind {other:?} (conv or fc)"
                )))
            }
        };
        let bits = l.precision.unwrap_or(default_precision);
        let precision = Precision::from_bits(bits)
            .ok_or_else(|| Error::Config(format!("layer {idx}: precision {bits} not 8 or 16")))?;
        layers.push(LayerSpec {
            kind,
            n_ic: l.n_ic,
            n_oc: l.n_oc,
            h_i: l.h_i,
            w_i: l.w_i,
            h_k: l.h_k,
            w_k: l.w_k,
            stride: l.stride,
            n_nzb_max: l.n_nzb_max.unwrap_or(default_n_max),
            precision,
            post_relu: l.post_relu,
            pool: l.pool.as_ref().map(|p| PoolSpec {
                window: p.window,
                stride: p.stride,
            }),
            out_shift: l.out_shift,
        });
    }
    Ok(LoadedNetwork {
        spec: NetworkSpec {
            name: file.name,
            input: file.input,
            layers,
            chained: file.chained,
        },
        n_nzb_max_8b: file.n_nzb_max_8b,
    })
}

/// Names of the bundled shape tables.
pub const BUILTIN_NETWORKS: [&str; 6] = [
    "alexnet",
    "vgg16",
    "resnet50",
    "googlenet",
    "yolov3",
    "smoke",
];

/// Bundled config text by name.
pub fn builtin(name: &str) -> Option<&'static str> {
    match name {
        "alexnet" => Some(include_str!("../configs/alexnet.toml")),
        "vgg16" => Some(include_str!("../configs/vgg16.toml")),
        "resnet50" => Some(include_str!("../configs/resnet50.toml")),
        "googlenet" => Some(include_str!("../configs/googlenet.toml")),
        "yolov3" => Some(include_str!("../configs/yolov3.toml")),
        "smoke" => Some(include_str!("../configs/smoke.toml")),
        _ => None,
    }
}

/// Loads a network by bundled name or from a file path.
pub fn load_network(name_or_path: &str) -> Result<LoadedNetwork> {
    if let Some(text) = builtin(name_or_path) {
        return parse_network(text);
    }
    let text = std::fs::read_to_string(name_or_path)?;
    parse_network(&text)
}
