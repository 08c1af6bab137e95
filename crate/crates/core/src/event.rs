//! Per-cycle event model for small arrays.
//!
//! Walks every PE through every cycle — fill ramp, lockstep compute step by
//! step, drain ramp, DMA deliveries word by word — and produces both the
//! OFM and a `CycleReport`. It exists to validate the closed-form timing in
//! [`crate::systolic`]: on arrays up to 8x8 the two must agree exactly, in
//! cycles and in the accounting. Kept deliberately independent of the
//! analytical path (no shared cost tables).

use crate::arch::ArchConfig;
use crate::dataflow::{pass_refill_words, schedule, TilingPlan};
use crate::encode::EncodedLayer;
use crate::error::{Error, Result};
use crate::layer::{output_dims, LayerKind, LayerSpec};
use crate::reference::{relu_pool, wrap_to_bits};
use crate::systolic::{ColumnTiming, CycleReport, WorkloadMode};
use crate::tensor::{FixedTensor, Precision};

pub const MAX_EVENT_ARRAY: usize = 8;

/// Cycle-by-cycle model of one weight pass through one column.
pub fn event_column(
    nnzbs: &[u32],
    n_max: u8,
    mode: WorkloadMode,
    precision: Precision,
) -> ColumnTiming {
    assert!(!nnzbs.is_empty());
    assert!(
        nnzbs.len() <= MAX_EVENT_ARRAY,
        "event model is for small arrays"
    );
    let n = nnzbs.len();
    let mut busy = vec![0u64; n];
    let mut idle = vec![0u64; n];
    let mut gated = vec![0u64; n];
    let mut latency = 0u64;
    match mode {
        WorkloadMode::DenseBitSerial => {
            for _bit in 0..precision.bits() {
                latency += 1;
                for b in busy.iter_mut() {
                    *b += 1;
                }
            }
        }
        WorkloadMode::SparseBalanced => {
            for slot in 0..n_max as u32 {
                latency += 1;
                for (i, &c) in nnzbs.iter().enumerate() {
                    assert!(c <= n_max as u32);
                    busy[i] += 1;
                    if slot >= c {
                        gated[i] += 1;
                    }
                }
            }
        }
        WorkloadMode::SparseImbalanced => {
            let mut remaining: Vec<u32> = nnzbs.to_vec();
            while remaining.iter().any(|&r| r > 0) {
                latency += 1;
                for (i, r) in remaining.iter_mut().enumerate() {
                    if *r > 0 {
                        *r -= 1;
                        busy[i] += 1;
                    } else {
                        idle[i] += 1;
                    }
                }
            }
        }
    }
    ColumnTiming {
        latency,
        idle,
        busy,
        gated,
    }
}

struct Counters {
    cycle: u64,
    compute: u64,
    fill_drain: u64,
    stall: u64,
    busy: u64,
    idle: u64,
    gated: u64,
}

/// Cycle-by-cycle simulation of a conv layer on an array of at most 8x8
/// PEs, DMA included. Returns the post-processed OFM and the same report
/// the analytical model produces.
pub fn event_layer(
    ifm: &FixedTensor,
    layer: &LayerSpec,
    enc: &EncodedLayer,
    plan: &TilingPlan,
    mode: WorkloadMode,
    arch: &ArchConfig,
) -> Result<(FixedTensor, CycleReport)> {
    if layer.kind != LayerKind::Conv {
        return Err(Error::PlanMismatch(
            "event model handles conv layers only".into(),
        ));
    }
    if arch.n_pe > MAX_EVENT_ARRAY {
        return Err(Error::PlanMismatch(format!(
            "event model is limited to {MAX_EVENT_ARRAY}x{MAX_EVENT_ARRAY} arrays"
        )));
    }
    let (h_o, w_o) = output_dims(layer)?;
    let passes: Vec<_> = schedule(plan, layer)?
        .into_iter()
        .filter(|p| p.out_pixels() > 0)
        .collect();
    let format = mode.weight_format(enc.n_max);
    let all_pes = (arch.n_pe * arch.n_pe) as u64;
    let ramp = arch.n_pe as u64 - 1;
    let lanes = match layer.precision {
        Precision::Bits16 => 1usize,
        Precision::Bits8 => 2,
    };
    let lane_bits = layer.precision.psum_bits();

    let mut c = Counters {
        cycle: 0,
        compute: 0,
        fill_drain: 0,
        stall: 0,
        busy: 0,
        idle: 0,
        gated: 0,
    };
    let mut out = vec![0i32; layer.n_oc * h_o * w_o];
    // per (oc tile group) accumulation across IC tiles
    let mut psums: Vec<i64> = Vec::new();
    let mut dma_remaining: u64 = passes
        .first()
        .map(|p| pass_refill_words(p, plan, layer, format))
        .unwrap_or(0);
    let wpc = arch.dram_words_per_cycle as u64;

    // cold start: nothing overlaps the first fill
    while dma_remaining > 0 {
        c.cycle += 1;
        c.stall += 1;
        c.idle += all_pes;
        dma_remaining = dma_remaining.saturating_sub(wpc);
    }

    for (pi, pass) in passes.iter().enumerate() {
        if pass.ic_tile == 0 {
            psums = vec![0i64; pass.oc_count * pass.out_pixels()];
        }
        dma_remaining = passes
            .get(pi + 1)
            .map(|p| pass_refill_words(p, plan, layer, format))
            .unwrap_or(0);
        let resident = (pass.oc_count * pass.ic_count) as u64;

        let tick_ramp = |c: &mut Counters| {
            c.cycle += 1;
            c.fill_drain += 1;
            c.idle += all_pes;
        };
        for _ in 0..ramp {
            tick_ramp(&mut c);
            dma_remaining = dma_remaining.saturating_sub(wpc);
        }

        let pixels: Vec<(usize, usize)> = (0..pass.out_h)
            .flat_map(|dx| {
                (0..pass.out_w).map(move |dy| (pass.first_out_x + dx, pass.first_out_y + dy))
            })
            .collect();
        for group in pixels.chunks(lanes) {
            for a in 0..layer.h_k {
                for b in 0..layer.w_k {
                    let steps = step_count(layer, enc, plan, mode, pass, a, b);
                    for k in 0..steps {
                        c.cycle += 1;
                        c.compute += 1;
                        dma_remaining = dma_remaining.saturating_sub(wpc);
                        let mut pes_busy = 0u64;
                        for o in 0..pass.oc_count {
                            let oc = pass.oc_tile * plan.n_pe + o;
                            for i in 0..pass.ic_count {
                                let ic = pass.ic_tile * plan.n_pe + i;
                                let idx = enc.index(oc, ic, a, b);
                                let (active, contributes) = pe_activity(enc, mode, idx, k);
                                if active {
                                    pes_busy += 1;
                                } else {
                                    c.idle += 1;
                                }
                                if mode == WorkloadMode::SparseBalanced && !contributes {
                                    c.gated += 1;
                                }
                                if !contributes {
                                    continue;
                                }
                                // each lane advances one pixel of the group
                                for &(x, y) in group {
                                    let iv = ifm.at3(ic, x * layer.stride + a, y * layer.stride + b)
                                        as i64;
                                    let term = pe_term(enc, mode, idx, k, iv);
                                    let slot = (o * pass.out_pixels()) + pixel_offset(pass, x, y);
                                    psums[slot] = wrap_to_bits(psums[slot] + term, lane_bits);
                                }
                            }
                        }
                        c.busy += pes_busy;
                        c.idle += all_pes - resident;
                    }
                }
            }
        }

        for _ in 0..ramp {
            tick_ramp(&mut c);
            dma_remaining = dma_remaining.saturating_sub(wpc);
        }

        // exposed remainder of the next pass's refill
        while dma_remaining > 0 {
            c.cycle += 1;
            c.stall += 1;
            c.idle += all_pes;
            dma_remaining = dma_remaining.saturating_sub(wpc);
        }

        if pass.ic_tile == plan.t_ic - 1 {
            for o in 0..pass.oc_count {
                let oc = pass.oc_tile * plan.n_pe + o;
                for dx in 0..pass.out_h {
                    for dy in 0..pass.out_w {
                        let x = pass.first_out_x + dx;
                        let y = pass.first_out_y + dy;
                        let v = psums[o * pass.out_pixels() + pixel_offset(pass, x, y)];
                        let shifted = v >> layer.out_shift;
                        out[(oc * h_o + x) * w_o + y] =
                            wrap_to_bits(shifted, layer.precision.bits()) as i32;
                    }
                }
            }
        }
    }

    let total = c.cycle;
    debug_assert_eq!(total, c.compute + c.fill_drain + c.stall);
    debug_assert_eq!(c.busy + c.idle, all_pes * total);
    let raw = FixedTensor::new(vec![layer.n_oc, h_o, w_o], layer.precision.bits(), out)?;
    let ofm = relu_pool(&raw, layer)?;
    Ok((
        ofm,
        CycleReport {
            total_cycles: total,
            compute_cycles: c.compute,
            fill_drain_cycles: c.fill_drain,
            stall_cycles: c.stall,
            pe_busy_cycles: c.busy,
            pe_idle_cycles: c.idle,
            utilization: if total == 0 {
                0.0
            } else {
                c.busy as f64 / (c.busy + c.idle) as f64
            },
            gated_step_count: c.gated,
        },
    ))
}

fn pixel_offset(pass: &crate::dataflow::TilePass, x: usize, y: usize) -> usize {
    (x - pass.first_out_x) * pass.out_w + (y - pass.first_out_y)
}

/// Lockstep step count for one kernel position.
fn step_count(
    layer: &LayerSpec,
    enc: &EncodedLayer,
    plan: &TilingPlan,
    mode: WorkloadMode,
    pass: &crate::dataflow::TilePass,
    a: usize,
    b: usize,
) -> u32 {
    match mode {
        WorkloadMode::DenseBitSerial => layer.precision.bits() as u32,
        WorkloadMode::SparseBalanced => enc.n_max as u32,
        WorkloadMode::SparseImbalanced => {
            let mut max = 0u32;
            for o in 0..pass.oc_count {
                for i in 0..pass.ic_count {
                    let idx = enc.index(
                        pass.oc_tile * plan.n_pe + o,
                        pass.ic_tile * plan.n_pe + i,
                        a,
                        b,
                    );
                    max = max.max(enc.nnzb_of(idx) as u32);
                }
            }
            max
        }
    }
}

/// Whether the PE is busy this step and whether it adds a term.
fn pe_activity(enc: &EncodedLayer, mode: WorkloadMode, idx: usize, k: u32) -> (bool, bool) {
    let valid = enc.nnzb_of(idx) as u32;
    match mode {
        WorkloadMode::DenseBitSerial => {
            let mag = enc.decode_at(idx).unsigned_abs();
            (true, mag >> k & 1 == 1)
        }
        WorkloadMode::SparseBalanced => (true, k < valid),
        WorkloadMode::SparseImbalanced => (k < valid, k < valid),
    }
}

/// The shift-add term the PE contributes this step.
fn pe_term(enc: &EncodedLayer, mode: WorkloadMode, idx: usize, k: u32, ifm: i64) -> i64 {
    let operand = if enc.sign(idx) { -ifm } else { ifm };
    match mode {
        WorkloadMode::DenseBitSerial => operand << k,
        WorkloadMode::SparseBalanced | WorkloadMode::SparseImbalanced => {
            operand << enc.position_slots(idx)[k as usize]
        }
    }
}
