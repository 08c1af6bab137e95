//! Layer and network shape descriptions.
//!
//! A `LayerSpec` carries everything the quantizer, planner, and simulator
//! need to know about one CONV or FC layer: shapes, stride, precision, the
//! per-layer cap on nonzero weight bits, and the post-processing (ReLU and
//! max-pooling) applied to its outputs. Padding is never modeled; input
//! extents are the pre-padded sizes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Precision;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Fc,
}

/// Max-pooling applied after ReLU on a layer's outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub window: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub n_ic: usize,
    pub n_oc: usize,
    pub h_i: usize,
    pub w_i: usize,
    pub h_k: usize,
    pub w_k: usize,
    pub stride: usize,
    /// Per-layer cap on nonzero bits per weight.
    pub n_nzb_max: u8,
    pub precision: Precision,
    pub post_relu: bool,
    pub pool: Option<PoolSpec>,
    /// Arithmetic right shift applied to the partial sum before the output
    /// is narrowed to `precision`. Defaults to 0.
    pub out_shift: u8,
}

impl LayerSpec {
    pub fn conv(n_ic: usize, n_oc: usize, h_i: usize, w_i: usize, h_k: usize, w_k: usize) -> Self {
        Self {
            kind: LayerKind::Conv,
            n_ic,
            n_oc,
            h_i,
            w_i,
            h_k,
            w_k,
            stride: 1,
            n_nzb_max: 4,
            precision: Precision::Bits16,
            post_relu: false,
            pool: None,
            out_shift: 0,
        }
    }

    pub fn fc(n_ic: usize, n_oc: usize) -> Self {
        Self {
            kind: LayerKind::Fc,
            n_ic,
            n_oc,
            h_i: 1,
            w_i: 1,
            h_k: 1,
            w_k: 1,
            stride: 1,
            n_nzb_max: 4,
            precision: Precision::Bits16,
            post_relu: false,
            pool: None,
            out_shift: 0,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn with_n_nzb_max(mut self, n: u8) -> Self {
        self.n_nzb_max = n;
        self
    }

    pub fn with_precision(mut self, p: Precision) -> Self {
        self.precision = p;
        self
    }

    pub fn with_relu(mut self) -> Self {
        self.post_relu = true;
        self
    }

    pub fn with_pool(mut self, window: usize, stride: usize) -> Self {
        self.pool = Some(PoolSpec { window, stride });
        self
    }

    pub fn weight_dims(&self) -> [usize; 4] {
        [self.n_oc, self.n_ic, self.h_k, self.w_k]
    }

    pub fn weight_count(&self) -> usize {
        self.n_oc * self.n_ic * self.h_k * self.w_k
    }

    pub fn mac_count(&self) -> u64 {
        let (h_o, w_o) = output_dims(self).unwrap_or((0, 0));
        (self.n_oc * self.n_ic * self.h_k * self.w_k) as u64 * (h_o * w_o) as u64
    }

    /// Output extents after convolution and, when configured, pooling.
    pub fn final_output_dims(&self) -> Result<(usize, usize)> {
        let (h_o, w_o) = output_dims(self)?;
        match self.pool {
            None => Ok((h_o, w_o)),
            Some(p) => {
                if p.window > h_o || p.window > w_o {
                    return Err(Error::PoolExceedsOutput {
                        window: p.window,
                        stride: p.stride,
                        h: h_o,
                        w: w_o,
                    });
                }
                Ok((
                    (h_o - p.window) / p.stride + 1,
                    (w_o - p.window) / p.stride + 1,
                ))
            }
        }
    }
}

/// Convolution output extents: floor((input - kernel) / stride) + 1 in each
/// dimension. FC layers are 1x1 by construction.
pub fn output_dims(layer: &LayerSpec) -> Result<(usize, usize)> {
    if layer.h_k > layer.h_i || layer.w_k > layer.w_i {
        return Err(Error::KernelExceedsInput {
            kernel: layer.h_k,
            kernel_w: layer.w_k,
            input: layer.h_i,
            input_w: layer.w_i,
        });
    }
    let h_o = (layer.h_i - layer.h_k) / layer.stride + 1;
    let w_o = (layer.w_i - layer.w_k) / layer.stride + 1;
    Ok((h_o, w_o))
}

/// An ordered list of layers plus the network's input extents.
///
/// `chained` marks networks whose layers feed each other directly; shape
/// tables of real branching/padded networks list each layer independently
/// and set it false, which skips the chain-compatibility diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    /// Input dims as [channels, height, width].
    pub input: [usize; 3],
    pub layers: Vec<LayerSpec>,
    #[serde(default = "default_chained")]
    pub chained: bool,
}

fn default_chained() -> bool {
    true
}

/// One validation finding: which layer, which field, what is wrong.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub layer: usize,
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "layer {} [{}]: {}", self.layer, self.field, self.message)
    }
}

use crate::arch::ArchConfig;

/// Checks every layer invariant and, for chained networks, that consecutive
/// shapes line up. Returns one diagnostic per violation; empty means valid.
pub fn validate_network(net: &NetworkSpec, arch: &ArchConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let diag = |layer: usize, field: &str, message: String| Diagnostic {
        layer,
        field: field.to_string(),
        message,
    };

    for (idx, layer) in net.layers.iter().enumerate() {
        if layer.kind == LayerKind::Fc
            && (layer.h_i != 1 || layer.w_i != 1 || layer.h_k != 1 || layer.w_k != 1)
        {
            out.push(diag(
                idx,
                "kind",
                "FC requires 1x1 kernel and 1x1 feature map".into(),
            ));
        }
        if layer.stride == 0 {
            out.push(diag(idx, "stride", "stride must be positive".into()));
        }
        if layer.n_ic == 0 || layer.n_oc == 0 {
            out.push(diag(
                idx,
                "channels",
                "channel counts must be positive".into(),
            ));
        }
        if layer.n_nzb_max == 0 || layer.n_nzb_max > layer.precision.bits() {
            out.push(diag(
                idx,
                "n_nzb_max",
                format!(
                    "n_nzb_max {} must be in 1..={}",
                    layer.n_nzb_max,
                    layer.precision.bits()
                ),
            ));
        }
        if layer.h_k > layer.h_i || layer.w_k > layer.w_i {
            out.push(diag(idx, "kernel", "kernel exceeds input".into()));
        } else if let (Some(p), Ok((h_o, w_o))) = (layer.pool, output_dims(layer)) {
            if p.window > h_o || p.window > w_o || p.stride == 0 {
                out.push(diag(idx, "pool", "pooling window exceeds output".into()));
            }
        }
        if layer.out_shift as u32 >= layer.precision.psum_bits() as u32 {
            out.push(diag(
                idx,
                "out_shift",
                "shift exceeds accumulator width".into(),
            ));
        }
        if layer.kind == LayerKind::Conv && layer.h_k <= layer.h_i && layer.w_k <= layer.w_i {
            // an IFM tile (halo included) must fit one buffer phase
            if let Ok((h_o, w_o)) = output_dims(layer) {
                let rows = crate::dataflow::TileAxis::build(
                    layer.h_i,
                    layer.h_k,
                    layer.stride,
                    arch.h_is,
                    h_o,
                );
                let cols = crate::dataflow::TileAxis::build(
                    layer.w_i,
                    layer.w_k,
                    layer.stride,
                    arch.w_is,
                    w_o,
                );
                let max_rows = rows.in_count.iter().max().copied().unwrap_or(0);
                let max_cols = cols.in_count.iter().max().copied().unwrap_or(0);
                let words = (max_rows * max_cols * layer.precision.bits() as usize).div_ceil(16);
                if words > arch.ifm_weight_buffer_words {
                    out.push(diag(
                        idx,
                        "buffer",
                        format!(
                            "IFM tile needs {words} words, buffer holds {}",
                            arch.ifm_weight_buffer_words
                        ),
                    ));
                }
            }
        }
    }

    if net.chained {
        if let Some(first) = net.layers.first() {
            if first.kind == LayerKind::Conv
                && (first.n_ic, first.h_i, first.w_i) != (net.input[0], net.input[1], net.input[2])
            {
                out.push(diag(
                    0,
                    "input",
                    "first layer does not match network input".into(),
                ));
            }
        }
        for idx in 1..net.layers.len() {
            let prev = &net.layers[idx - 1];
            let cur = &net.layers[idx];
            let Ok((h_p, w_p)) = prev.final_output_dims() else {
                continue; // already diagnosed above
            };
            let expect = match cur.kind {
                LayerKind::Conv => (prev.n_oc, h_p, w_p),
                // FC flattens whatever comes out of the previous layer.
                LayerKind::Fc => (prev.n_oc * h_p * w_p, 1, 1),
            };
            if (cur.n_ic, cur.h_i, cur.w_i) != expect {
                out.push(diag(
                    idx,
                    "shape",
                    format!(
                        "expected input {}x{}x{} from layer {}, config says {}x{}x{}",
                        expect.0,
                        expect.1,
                        expect.2,
                        idx - 1,
                        cur.n_ic,
                        cur.h_i,
                        cur.w_i
                    ),
                ));
            }
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::ArchConfig;

    fn two_layer_net() -> NetworkSpec {
        NetworkSpec {
            name: "t".into(),
            input: [2, 8, 8],
            layers: vec![
                LayerSpec::conv(2, 4, 8, 8, 3, 3).with_relu(),
                LayerSpec::conv(4, 4, 6, 6, 3, 3),
            ],
            chained: true,
        }
    }

    #[test]
    fn well_formed_net_has_no_diagnostics() {
        assert!(validate_network(&two_layer_net(), &ArchConfig::default()).is_empty());
    }

    #[test]
    fn fc_with_kernel_is_diagnosed() {
        let mut net = two_layer_net();
        net.layers[1].kind = LayerKind::Fc;
        net.layers[1].h_k = 3;
        net.chained = false;
        let diags = validate_network(&net, &ArchConfig::default());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].layer, 1);
        assert!(diags[0].message.contains("1x1"));
    }

    #[test]
    fn nnzb_bound_is_diagnosed() {
        let mut net = two_layer_net();
        net.layers[0].n_nzb_max = 17;
        let diags = validate_network(&net, &ArchConfig::default());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].field, "n_nzb_max");
    }

    #[test]
    fn broken_chain_is_diagnosed() {
        let mut net = two_layer_net();
        net.layers[1].h_i = 7;
        net.layers[1].w_i = 7;
        let diags = validate_network(&net, &ArchConfig::default());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].field, "shape");
        net.chained = false;
        assert!(validate_network(&net, &ArchConfig::default()).is_empty());
    }

    #[test]
    fn tiny_buffer_is_diagnosed() {
        let net = two_layer_net();
        let arch = ArchConfig {
            ifm_weight_buffer_words: 4,
            ..ArchConfig::default()
        };
        let diags = validate_network(&net, &arch);
        assert_eq!(diags.len(), 2);
        assert!(diags.iter().all(|d| d.field == "buffer"));
    }

    #[test]
    fn output_dims_formula() {
        let l = LayerSpec::conv(1, 1, 8, 8, 3, 3);
        assert_eq!(output_dims(&l).unwrap(), (6, 6));
        let l = LayerSpec::conv(1, 1, 8, 8, 8, 8);
        assert_eq!(output_dims(&l).unwrap(), (1, 1));
        let l = LayerSpec::conv(3, 96, 227, 227, 11, 11).with_stride(4);
        assert_eq!(output_dims(&l).unwrap(), (55, 55));
        let l = LayerSpec::conv(1, 1, 4, 4, 5, 5);
        assert!(output_dims(&l).is_err());
    }

    /// Independent oracle: count the window placements that fit.
    fn count_placements(input: usize, kernel: usize, stride: usize) -> usize {
        (0..)
            .map(|x| x * stride)
            .take_while(|&start| start + kernel <= input)
            .count()
    }

    #[test]
    fn output_dims_matches_placement_enumeration() {
        for h_i in 1..=16 {
            for h_k in 1..=h_i {
                for stride in 1..=4 {
                    let l = LayerSpec::conv(1, 1, h_i, h_i, h_k, h_k).with_stride(stride);
                    let (h_o, _) = output_dims(&l).unwrap();
                    assert_eq!(
                        h_o,
                        count_placements(h_i, h_k, stride),
                        "h_i={h_i} h_k={h_k} stride={stride}"
                    );
                }
            }
        }
    }
}
