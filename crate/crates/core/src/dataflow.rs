//! Data partition, loop-nest schedule, and DRAM traffic accounting.
//!
//! Layers are tiled four ways: input channels and output channels in chunks
//! of the array edge, and the feature map spatially in `w_is` x `h_is`
//! blocks. Spatial tiles carry the halo rows/columns their outputs need, and
//! halo re-fetches count toward IFM traffic.
//!
//! Two dataflows are supported. Reuse-IFM-first (RIF) keeps an output
//! tile's IFMs resident and walks all weight tiles, so the full weight set
//! streams in once per spatial tile. Reuse-weight-first (RWF) keeps an OC
//! tile's weights resident and walks all spatial tiles, re-fetching the IFM
//! once per OC tile. Per layer, the cheaper one in total DRAM bits wins.

use serde::{Deserialize, Serialize};

use crate::arch::ArchConfig;
use crate::encode::bits_per_weight;
use crate::error::{Error, Result};
use crate::layer::{output_dims, LayerSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Dataflow {
    Rif,
    Rwf,
}

impl std::fmt::Display for Dataflow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Dataflow::Rif => write!(f, "RIF"),
            Dataflow::Rwf => write!(f, "RWF"),
        }
    }
}

/// How weights travel to the chip: encoded streams or raw fixed-point
/// words (the dense-baseline format).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightFormat {
    Encoded { n_max: u8 },
    Raw,
}

impl WeightFormat {
    pub fn bits_per_weight(self, layer: &LayerSpec) -> u32 {
        match self {
            WeightFormat::Encoded { n_max } => bits_per_weight(layer.precision, n_max),
            WeightFormat::Raw => layer.precision.bits() as u32,
        }
    }
}

/// Tile layout along one spatial axis: which output rows each tile owns and
/// how many input rows (body plus halo) it must fetch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TileAxis {
    pub first_out: Vec<usize>,
    pub out_count: Vec<usize>,
    pub in_count: Vec<usize>,
}

impl TileAxis {
    /// Assigns output rows to tiles of `tile` input rows each and records
    /// the input span (body plus halo) every tile must fetch.
    pub fn build(input: usize, kernel: usize, stride: usize, tile: usize, n_out: usize) -> Self {
        let tiles = input.div_ceil(tile);
        let mut first_out = vec![0; tiles];
        let mut out_count = vec![0; tiles];
        let mut in_count = vec![0; tiles];
        for t in 0..tiles {
            // outputs whose window starts inside [t*tile, (t+1)*tile)
            let lo = (t * tile).div_ceil(stride);
            let hi = (((t + 1) * tile - 1) / stride).min(n_out.saturating_sub(1));
            first_out[t] = lo;
            if n_out > 0 && lo <= hi {
                out_count[t] = hi - lo + 1;
                in_count[t] = (hi - lo) * stride + kernel;
            }
        }
        Self {
            first_out,
            out_count,
            in_count,
        }
    }
}

/// Data partition of one layer plus, once chosen, its dataflow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TilingPlan {
    pub t_ic: usize,
    pub t_oc: usize,
    pub t_wi: usize,
    pub t_hi: usize,
    pub w_is: usize,
    pub h_is: usize,
    pub n_pe: usize,
    pub rows: TileAxis,
    pub cols: TileAxis,
    pub dataflow: Option<Dataflow>,
}

impl TilingPlan {
    pub fn ic_count(&self, e: usize, layer: &LayerSpec) -> usize {
        (layer.n_ic - e * self.n_pe).min(self.n_pe)
    }

    pub fn oc_count(&self, d: usize, layer: &LayerSpec) -> usize {
        (layer.n_oc - d * self.n_pe).min(self.n_pe)
    }

    /// Spatial tiles that own at least one output pixel.
    pub fn active_output_tiles(&self) -> usize {
        let rows = self.rows.out_count.iter().filter(|&&c| c > 0).count();
        let cols = self.cols.out_count.iter().filter(|&&c| c > 0).count();
        rows * cols
    }

    pub fn matches(&self, layer: &LayerSpec, arch: &ArchConfig) -> bool {
        self.n_pe == arch.n_pe
            && self.w_is == arch.w_is
            && self.h_is == arch.h_is
            && self.t_ic == layer.n_ic.div_ceil(arch.n_pe)
            && self.t_oc == layer.n_oc.div_ceil(arch.n_pe)
            && self.t_wi == layer.w_i.div_ceil(arch.w_is)
            && self.t_hi == layer.h_i.div_ceil(arch.h_is)
    }
}

/// Computes the Table-2 style partition. Divisions are ceilings; edge tiles
/// are partial. The dataflow is left unset.
pub fn tile_layer(layer: &LayerSpec, arch: &ArchConfig) -> Result<TilingPlan> {
    let (h_o, w_o) = output_dims(layer)?;
    Ok(TilingPlan {
        t_ic: layer.n_ic.div_ceil(arch.n_pe),
        t_oc: layer.n_oc.div_ceil(arch.n_pe),
        t_wi: layer.w_i.div_ceil(arch.w_is),
        t_hi: layer.h_i.div_ceil(arch.h_is),
        w_is: arch.w_is,
        h_is: arch.h_is,
        n_pe: arch.n_pe,
        rows: TileAxis::build(layer.h_i, layer.h_k, layer.stride, arch.h_is, h_o),
        cols: TileAxis::build(layer.w_i, layer.w_k, layer.stride, arch.w_is, w_o),
        dataflow: None,
    })
}

/// DRAM traffic of one layer in bits, split by stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficReport {
    pub dram_bits_ifm: u64,
    pub dram_bits_weight: u64,
    pub dram_bits_ofm: u64,
    pub total_bits: u64,
    /// 16-bit word transfers.
    pub total_accesses: u64,
}

/// Bits of IFM one full traversal fetches, halo included.
fn ifm_bits_single(layer: &LayerSpec, plan: &TilingPlan) -> u64 {
    let mut pixels = 0u64;
    for &rin in &plan.rows.in_count {
        for &cin in &plan.cols.in_count {
            pixels += rin as u64 * cin as u64;
        }
    }
    pixels * layer.n_ic as u64 * layer.precision.bits() as u64
}

fn ofm_bits(layer: &LayerSpec) -> Result<u64> {
    let (h, w) = layer.final_output_dims()?;
    Ok((layer.n_oc * h * w) as u64 * layer.precision.bits() as u64)
}

/// Traffic of one layer under the given dataflow. RIF re-fetches the weight
/// set once per (non-empty) spatial tile; RWF re-fetches the IFM once per
/// OC tile. OFMs are written exactly once.
pub fn dram_traffic(
    layer: &LayerSpec,
    plan: &TilingPlan,
    dataflow: Dataflow,
    format: WeightFormat,
) -> Result<TrafficReport> {
    let ifm_single = ifm_bits_single(layer, plan);
    let weight_single = layer.weight_count() as u64 * format.bits_per_weight(layer) as u64;
    let (ifm, weight) = match dataflow {
        Dataflow::Rif => (
            ifm_single,
            weight_single * plan.active_output_tiles() as u64,
        ),
        Dataflow::Rwf => (ifm_single * plan.t_oc as u64, weight_single),
    };
    let ofm = ofm_bits(layer)?;
    Ok(TrafficReport {
        dram_bits_ifm: ifm,
        dram_bits_weight: weight,
        dram_bits_ofm: ofm,
        total_bits: ifm + weight + ofm,
        total_accesses: ifm.div_ceil(16) + weight.div_ceil(16) + ofm.div_ceil(16),
    })
}

/// Picks the dataflow with the smaller total traffic; ties go to RIF.
pub fn choose_dataflow(
    layer: &LayerSpec,
    plan: &TilingPlan,
    format: WeightFormat,
) -> Result<Dataflow> {
    let rif = dram_traffic(layer, plan, Dataflow::Rif, format)?;
    let rwf = dram_traffic(layer, plan, Dataflow::Rwf, format)?;
    Ok(if rwf.total_bits < rif.total_bits {
        Dataflow::Rwf
    } else {
        Dataflow::Rif
    })
}

/// One pass of the loop nest: one (spatial tile, OC tile, IC tile) triple,
/// plus what the DMA must stage for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TilePass {
    pub tile_x: usize,
    pub tile_y: usize,
    pub oc_tile: usize,
    pub ic_tile: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub first_out_x: usize,
    pub first_out_y: usize,
    pub ic_count: usize,
    pub oc_count: usize,
    pub loads_ifm: bool,
    pub loads_weights: bool,
}

impl TilePass {
    pub fn out_pixels(&self) -> usize {
        self.out_h * self.out_w
    }
}

/// Emits the tile passes in loop-nest order. Under RIF all OC tiles of one
/// spatial tile run back to back; under RWF all spatial tiles of one OC
/// tile run back to back. Every (spatial, OC, IC) triple appears exactly
/// once; passes whose tile owns no output pixels stage nothing.
pub fn schedule(plan: &TilingPlan, layer: &LayerSpec) -> Result<Vec<TilePass>> {
    let Some(dataflow) = plan.dataflow else {
        return Err(Error::PlanMismatch("dataflow not chosen yet".into()));
    };
    let (t_oc_rwf, t_oc_rif) = match dataflow {
        Dataflow::Rif => (1, plan.t_oc),
        Dataflow::Rwf => (plan.t_oc, 1),
    };
    let mut passes = Vec::with_capacity(plan.t_oc * plan.t_wi * plan.t_hi * plan.t_ic);
    for a in 0..t_oc_rwf {
        for b in 0..plan.t_wi {
            for c in 0..plan.t_hi {
                for d in 0..t_oc_rif {
                    for e in 0..plan.t_ic {
                        let oc_tile = match dataflow {
                            Dataflow::Rif => d,
                            Dataflow::Rwf => a,
                        };
                        let out_h = plan.rows.out_count[c];
                        let out_w = plan.cols.out_count[b];
                        let empty = out_h == 0 || out_w == 0;
                        passes.push(TilePass {
                            tile_x: b,
                            tile_y: c,
                            oc_tile,
                            ic_tile: e,
                            out_h,
                            out_w,
                            first_out_x: plan.rows.first_out[c],
                            first_out_y: plan.cols.first_out[b],
                            ic_count: plan.ic_count(e, layer),
                            oc_count: plan.oc_count(oc_tile, layer),
                            loads_ifm: !empty
                                && match dataflow {
                                    Dataflow::Rif => d == 0,
                                    Dataflow::Rwf => true,
                                },
                            loads_weights: !empty
                                && match dataflow {
                                    Dataflow::Rif => true,
                                    Dataflow::Rwf => b == 0 && c == 0,
                                },
                        });
                    }
                }
            }
        }
    }
    Ok(passes)
}

/// 16-bit words the DMA stages for one pass: the IFM tile (halo included)
/// and/or the pass's weight tile, per its load flags.
pub fn pass_refill_words(
    pass: &TilePass,
    plan: &TilingPlan,
    layer: &LayerSpec,
    format: WeightFormat,
) -> u64 {
    let mut bits = 0u64;
    if pass.loads_ifm {
        bits += plan.rows.in_count[pass.tile_y] as u64
            * plan.cols.in_count[pass.tile_x] as u64
            * pass.ic_count as u64
            * layer.precision.bits() as u64;
    }
    if pass.loads_weights {
        bits += (pass.oc_count * pass.ic_count * layer.h_k * layer.w_k) as u64
            * format.bits_per_weight(layer) as u64;
    }
    bits.div_ceil(16)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Precision;

    fn arch() -> ArchConfig {
        ArchConfig::default()
    }

    fn plan_for(layer: &LayerSpec) -> TilingPlan {
        tile_layer(layer, &arch()).unwrap()
    }

    #[test]
    fn tile_count_formulas() {
        let l = LayerSpec::conv(64, 64, 8, 8, 1, 1);
        let p = plan_for(&l);
        assert_eq!((p.t_ic, p.t_oc, p.t_wi, p.t_hi), (2, 2, 1, 1));

        let l = LayerSpec::conv(48, 32, 8, 8, 1, 1);
        let p = plan_for(&l);
        assert_eq!(p.t_ic, 2);
        assert_eq!(p.ic_count(0, &l), 32);
        assert_eq!(p.ic_count(1, &l), 16);
    }

    /// Oracle: every output pixel owned exactly once, every input pixel a
    /// tile needs is inside its fetched range.
    #[test]
    fn coverage_bitmap_complete_and_disjoint() {
        let shapes = [
            (8usize, 1usize, 1usize),
            (10, 3, 1),
            (17, 3, 2),
            (227, 11, 4),
            (31, 5, 1),
            (16, 8, 8),
        ];
        for (input, kernel, stride) in shapes {
            let n_out = (input - kernel) / stride + 1;
            let axis = TileAxis::build(input, kernel, stride, 8, n_out);
            let mut owned = vec![0u32; n_out];
            for t in 0..axis.first_out.len() {
                for off in 0..axis.out_count[t] {
                    let x = axis.first_out[t] + off;
                    owned[x] += 1;
                    // input range check: window of x must sit inside the fetch
                    let fetch_lo = axis.first_out[t] * stride;
                    let fetch_hi = fetch_lo + axis.in_count[t];
                    assert!(x * stride >= fetch_lo && x * stride + kernel <= fetch_hi);
                }
            }
            assert!(
                owned.iter().all(|&c| c == 1),
                "input={input} kernel={kernel} stride={stride}"
            );
        }
    }

    #[test]
    fn halo_counts_toward_ifm_traffic() {
        // 16x16 input, 3x3 kernel, stride 1, 8x8 tiles: the first tile owns
        // 8 output rows and fetches 10 input rows (2 halo), the second owns
        // the remaining 6 and fetches 8.
        let l = LayerSpec::conv(1, 1, 16, 16, 3, 3);
        let p = plan_for(&l);
        assert_eq!(p.rows.out_count, vec![8, 6]);
        assert_eq!(p.rows.in_count, vec![10, 8]);
    }

    #[test]
    fn rif_vs_rwf_factors() {
        // 4 spatial tiles, 2 OC tiles, weight-heavy layer
        let l = LayerSpec::conv(32, 64, 16, 16, 3, 3);
        let p = plan_for(&l);
        assert_eq!((p.t_wi * p.t_hi, p.t_oc), (4, 2));
        let fmt = WeightFormat::Encoded { n_max: 4 };
        let rif = dram_traffic(&l, &p, Dataflow::Rif, fmt).unwrap();
        let rwf = dram_traffic(&l, &p, Dataflow::Rwf, fmt).unwrap();
        let w1 = l.weight_count() as u64 * 21;
        let i1: u64 = p
            .rows
            .in_count
            .iter()
            .flat_map(|&r| p.cols.in_count.iter().map(move |&c| (r * c) as u64))
            .sum::<u64>()
            * 32
            * 16;
        assert_eq!(rif.dram_bits_weight, 4 * w1);
        assert_eq!(rif.dram_bits_ifm, i1);
        assert_eq!(rwf.dram_bits_weight, w1);
        assert_eq!(rwf.dram_bits_ifm, 2 * i1);
        assert_eq!(rif.dram_bits_ofm, rwf.dram_bits_ofm);
        // weights dominate: reusing them wins
        assert_eq!(choose_dataflow(&l, &p, fmt).unwrap(), Dataflow::Rwf);
    }

    #[test]
    fn single_tile_is_a_tie_and_rif_wins() {
        let l = LayerSpec::conv(8, 8, 8, 8, 3, 3);
        let p = plan_for(&l);
        let fmt = WeightFormat::Encoded { n_max: 3 };
        let rif = dram_traffic(&l, &p, Dataflow::Rif, fmt).unwrap();
        let rwf = dram_traffic(&l, &p, Dataflow::Rwf, fmt).unwrap();
        assert_eq!(rif, rwf);
        assert_eq!(choose_dataflow(&l, &p, fmt).unwrap(), Dataflow::Rif);
    }

    #[test]
    fn encoded_16b_n3_weight_traffic_equals_raw() {
        let l = LayerSpec::conv(32, 32, 8, 8, 3, 3).with_n_nzb_max(3);
        let p = plan_for(&l);
        let enc = dram_traffic(&l, &p, Dataflow::Rif, WeightFormat::Encoded { n_max: 3 }).unwrap();
        let raw = dram_traffic(&l, &p, Dataflow::Rif, WeightFormat::Raw).unwrap();
        assert_eq!(enc.dram_bits_weight, raw.dram_bits_weight);
    }

    #[test]
    fn choose_matches_brute_force_over_grid() {
        for t_oc in 1..=8usize {
            for t_sp in 1..=8usize {
                // exact-dividing shapes so tile counts are exactly (t_oc, t_sp)
                let l = LayerSpec::conv(32, 32 * t_oc, 8 * t_sp, 8, 3, 3).with_n_nzb_max(4);
                let p = plan_for(&l);
                assert_eq!((p.t_oc, p.t_wi * p.t_hi), (t_oc, t_sp));
                let fmt = WeightFormat::Encoded { n_max: 4 };
                let rif = dram_traffic(&l, &p, Dataflow::Rif, fmt).unwrap().total_bits;
                let rwf = dram_traffic(&l, &p, Dataflow::Rwf, fmt).unwrap().total_bits;
                let best = choose_dataflow(&l, &p, fmt).unwrap();
                let best_bits = dram_traffic(&l, &p, best, fmt).unwrap().total_bits;
                assert_eq!(best_bits, rif.min(rwf));
                if rif != rwf {
                    assert_eq!(best == Dataflow::Rif, rif < rwf);
                }
            }
        }
    }

    #[test]
    fn traffic_monotone_in_tile_counts() {
        let fmt = WeightFormat::Encoded { n_max: 4 };
        let mut last_rwf_ifm = 0;
        for t_oc in 1..=6 {
            let l = LayerSpec::conv(32, 32 * t_oc, 8, 8, 1, 1);
            let p = plan_for(&l);
            let rwf = dram_traffic(&l, &p, Dataflow::Rwf, fmt).unwrap();
            assert!(rwf.dram_bits_ifm >= last_rwf_ifm);
            last_rwf_ifm = rwf.dram_bits_ifm;
        }
        let mut last_rif_w = 0;
        for t_sp in 1..=6 {
            let l = LayerSpec::conv(32, 32, 8 * t_sp, 8, 1, 1);
            let p = plan_for(&l);
            let rif = dram_traffic(&l, &p, Dataflow::Rif, fmt).unwrap();
            assert!(rif.dram_bits_weight >= last_rif_w);
            last_rif_w = rif.dram_bits_weight;
        }
    }

    #[test]
    fn schedule_order_rif_then_rwf() {
        let l = LayerSpec::conv(32, 64, 8, 8, 3, 3);
        let mut p = plan_for(&l);
        p.dataflow = Some(Dataflow::Rif);
        let passes = schedule(&p, &l).unwrap();
        assert_eq!(
            passes.iter().map(|p| p.oc_tile).collect::<Vec<_>>(),
            vec![0, 1]
        );

        let l = LayerSpec::conv(32, 64, 16, 8, 3, 3);
        let mut p = plan_for(&l);
        p.dataflow = Some(Dataflow::Rwf);
        let passes = schedule(&p, &l).unwrap();
        let ocs: Vec<usize> = passes.iter().map(|p| p.oc_tile).collect();
        assert_eq!(ocs, vec![0, 0, 1, 1]);
        // weights loaded once per OC tile, IFM every pass
        assert_eq!(passes.iter().filter(|p| p.loads_weights).count(), 2);
        assert!(passes.iter().all(|p| p.loads_ifm));
    }

    #[test]
    fn schedule_covers_cross_product_once() {
        let l = LayerSpec::conv(70, 96, 20, 17, 3, 3);
        for df in [Dataflow::Rif, Dataflow::Rwf] {
            let mut p = plan_for(&l);
            p.dataflow = Some(df);
            let passes = schedule(&p, &l).unwrap();
            let mut seen = std::collections::HashSet::new();
            for pass in &passes {
                assert!(seen.insert((pass.tile_x, pass.tile_y, pass.oc_tile, pass.ic_tile)));
            }
            assert_eq!(seen.len(), p.t_wi * p.t_hi * p.t_oc * p.t_ic);
        }
    }

    #[test]
    fn refill_words_consistent_with_traffic() {
        // With every tile producing output, summing per-pass refills over the
        // schedule reproduces the layer's IFM+weight traffic.
        for df in [Dataflow::Rif, Dataflow::Rwf] {
            let l = LayerSpec::conv(48, 96, 16, 16, 3, 3).with_precision(Precision::Bits16);
            let mut p = plan_for(&l);
            p.dataflow = Some(df);
            let fmt = WeightFormat::Encoded { n_max: 4 };
            let t = dram_traffic(&l, &p, df, fmt).unwrap();
            let refills: u64 = schedule(&p, &l)
                .unwrap()
                .iter()
                .map(|pass| pass_refill_words(pass, &p, &l, fmt))
                .sum();
            // word-granularity rounding only ever rounds up per pass
            let exact_words = (t.dram_bits_ifm + t.dram_bits_weight) / 16;
            assert!(refills >= exact_words);
            assert!(refills <= exact_words + schedule(&p, &l).unwrap().len() as u64 * 2);
        }
    }
}
