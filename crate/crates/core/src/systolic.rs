//! Cycle-level model of the systolic array.
//!
//! Rows of the array share the IFMs of one input channel, columns
//! accumulate one output channel. Each PE is a complement/shift/accumulate
//! datapath fed one weight field triple (sign, position, bitmap bit) per
//! cycle; a zero bitmap bit gates the PE for that cycle. In 8-bit mode the
//! 16-bit datapath splits into two lanes that carry two output pixels per
//! step, doubling peak throughput.
//!
//! Timing is analytical: per tile pass, a fill ramp of `n_pe - 1` cycles,
//! `pixel_steps x kernel x cycles_per_weight(mode)` lockstep compute, and a
//! matching drain ramp. DRAM refills for the next pass overlap the current
//! one through the ping-pong buffers; only the excess shows up as stall.
//! The formula is validated against the per-cycle event model in
//! [`crate::event`] for small arrays.
//!
//! Three workload policies time the same functional results:
//! dense bit-serial (every weight costs `precision` cycles), sparse
//! imbalanced (each weight costs its own NNZB, the array syncs at the max),
//! and sparse balanced (every weight costs `n_max`, idle replaced by gated
//! steps). Outputs never depend on the mode.

use serde::{Deserialize, Serialize};

use crate::arch::ArchConfig;
use crate::dataflow::{
    choose_dataflow, pass_refill_words, schedule, tile_layer, Dataflow, TilePass, TilingPlan,
    WeightFormat,
};
use crate::encode::{EncodedLayer, EncodedWeight};
use crate::error::{Error, Result};
use crate::gen;
use crate::layer::{output_dims, LayerKind, LayerSpec, NetworkSpec};
use crate::reference::{relu_pool, wrap_to_bits, Psum};
use crate::tensor::{FixedTensor, Precision};

/// Timing policy for the same functional workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WorkloadMode {
    /// One cycle per magnitude bit, set or not.
    DenseBitSerial,
    /// One cycle per nonzero bit; the array waits for the largest NNZB.
    SparseImbalanced,
    /// One cycle per position slot; short weights gate instead of idling.
    SparseBalanced,
}

impl WorkloadMode {
    /// How the DMA ships weights under this policy.
    pub fn weight_format(self, n_max: u8) -> WeightFormat {
        match self {
            WorkloadMode::DenseBitSerial => WeightFormat::Raw,
            _ => WeightFormat::Encoded { n_max },
        }
    }
}

impl std::fmt::Display for WorkloadMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WorkloadMode::DenseBitSerial => write!(f, "dense"),
            WorkloadMode::SparseImbalanced => write!(f, "imbalanced"),
            WorkloadMode::SparseBalanced => write!(f, "balanced"),
        }
    }
}

/// One weight field triple as the PE sees it each cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightSlot {
    pub sign: bool,
    pub position: u8,
    pub valid: bool,
}

impl WeightSlot {
    /// Slot `k` of an encoded weight.
    pub fn of(e: &EncodedWeight, k: usize) -> Self {
        Self {
            sign: e.sign,
            position: e.positions[k],
            valid: e.bitmap >> k & 1 == 1,
        }
    }
}

/// One shift-add lane: current operand and partial sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lane {
    pub psum: i64,
}

/// PE datapath state: one 32-bit lane in 16-bit mode, two 16-bit lanes in
/// 8-bit mode. `gated` reflects the most recent cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PEState {
    pub lanes: Vec<Lane>,
    pub lane_bits: u8,
    pub gated: bool,
}

impl PEState {
    pub fn new(precision: Precision) -> Self {
        let (lanes, lane_bits) = match precision {
            Precision::Bits16 => (1, 32),
            Precision::Bits8 => (2, 16),
        };
        Self {
            lanes: vec![Lane { psum: 0 }; lanes],
            lane_bits,
            gated: false,
        }
    }
}

/// Advances one PE by one cycle. Each lane gets its own operand and weight
/// slot; an invalid slot leaves the lane's psum untouched and gates it.
pub fn pe_step(state: &PEState, lane_inputs: &[(i32, WeightSlot)]) -> PEState {
    assert_eq!(lane_inputs.len(), state.lanes.len(), "one input per lane");
    let mut next = state.clone();
    let mut all_gated = true;
    for (lane, &(ifm, slot)) in next.lanes.iter_mut().zip(lane_inputs) {
        if !slot.valid {
            continue;
        }
        all_gated = false;
        let operand = if slot.sign { -(ifm as i64) } else { ifm as i64 };
        lane.psum = wrap_to_bits(lane.psum + (operand << slot.position), state.lane_bits);
    }
    next.gated = all_gated;
    next
}

/// Latency and per-PE accounting for one pass of one column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnTiming {
    pub latency: u64,
    pub idle: Vec<u64>,
    pub busy: Vec<u64>,
    pub gated: Vec<u64>,
}

/// Times one weight pass of a PE column holding `nnzbs` (one weight per
/// PE). Dense costs `precision` for everyone; imbalanced lets each PE run
/// its own bit count and syncs at the column max; balanced runs exactly
/// `n_max` slots with gating instead of idling.
pub fn simulate_column(
    nnzbs: &[u32],
    n_max: u8,
    mode: WorkloadMode,
    precision: Precision,
) -> ColumnTiming {
    assert!(!nnzbs.is_empty(), "column needs at least one weight");
    let n = nnzbs.len();
    match mode {
        WorkloadMode::DenseBitSerial => {
            let latency = precision.bits() as u64;
            ColumnTiming {
                latency,
                idle: vec![0; n],
                busy: vec![latency; n],
                gated: vec![0; n],
            }
        }
        WorkloadMode::SparseImbalanced => {
            let latency = *nnzbs.iter().max().unwrap() as u64;
            ColumnTiming {
                latency,
                idle: nnzbs.iter().map(|&c| latency - c as u64).collect(),
                busy: nnzbs.iter().map(|&c| c as u64).collect(),
                gated: vec![0; n],
            }
        }
        WorkloadMode::SparseBalanced => {
            let latency = n_max as u64;
            for &c in nnzbs {
                assert!(
                    c as u64 <= latency,
                    "weight with {c} nonzero bits exceeds n_max {n_max}"
                );
            }
            ColumnTiming {
                latency,
                idle: vec![0; n],
                busy: vec![latency; n],
                gated: nnzbs.iter().map(|&c| latency - c as u64).collect(),
            }
        }
    }
}

/// Convenience wrapper over a column of encoded weights.
pub fn simulate_column_encoded(
    weights: &[EncodedWeight],
    mode: WorkloadMode,
    precision: Precision,
) -> ColumnTiming {
    assert!(!weights.is_empty());
    let n_max = weights[0].n_max;
    let nnzbs: Vec<u32> = weights.iter().map(|w| w.valid_count()).collect();
    simulate_column(&nnzbs, n_max, mode, precision)
}

/// Per-layer timing report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub total_cycles: u64,
    pub compute_cycles: u64,
    pub fill_drain_cycles: u64,
    pub stall_cycles: u64,
    pub pe_busy_cycles: u64,
    pub pe_idle_cycles: u64,
    /// busy / (busy + idle); busy + idle = n_pe^2 x total_cycles.
    pub utilization: f64,
    pub gated_step_count: u64,
}

/// Per-network aggregate: layers execute back to back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCycleReport {
    pub layers: Vec<CycleReport>,
    pub total_cycles: u64,
    pub frames_per_second: f64,
}

/// Per-(oc tile, ic tile) cost aggregates, precomputed once per layer.
///
/// For each resident weight group they hold, summed over kernel positions:
/// the lockstep step cost, the per-PE busy cycles, the balanced gated
/// steps, and the imbalanced in-compute idle. All are per pixel-step.
struct PassCosts {
    t_ic: usize,
    step: Vec<u64>,
    busy: Vec<u64>,
    gated: Vec<u64>,
    idle_active: Vec<u64>,
}

impl PassCosts {
    fn build(layer: &LayerSpec, enc: &EncodedLayer, plan: &TilingPlan, mode: WorkloadMode) -> Self {
        let kernel = layer.h_k * layer.w_k;
        let per_weight = match mode {
            WorkloadMode::DenseBitSerial => layer.precision.bits() as u64,
            WorkloadMode::SparseBalanced => enc.n_max as u64,
            WorkloadMode::SparseImbalanced => 0, // per-group max, below
        };
        let groups = plan.t_oc * plan.t_ic;
        let mut step = vec![0u64; groups];
        let mut busy = vec![0u64; groups];
        let mut gated = vec![0u64; groups];
        let mut idle_active = vec![0u64; groups];
        for d in 0..plan.t_oc {
            for e in 0..plan.t_ic {
                let g = d * plan.t_ic + e;
                let ocs = plan.oc_count(d, layer);
                let ics = plan.ic_count(e, layer);
                let resident = (ocs * ics) as u64;
                match mode {
                    WorkloadMode::DenseBitSerial | WorkloadMode::SparseBalanced => {
                        step[g] = kernel as u64 * per_weight;
                        busy[g] = step[g] * resident;
                        if mode == WorkloadMode::SparseBalanced {
                            let mut short = 0u64;
                            for o in 0..ocs {
                                for i in 0..ics {
                                    for a in 0..layer.h_k {
                                        for b in 0..layer.w_k {
                                            let idx = enc.index(
                                                d * plan.n_pe + o,
                                                e * plan.n_pe + i,
                                                a,
                                                b,
                                            );
                                            short += enc.n_max as u64 - enc.nnzb_of(idx) as u64;
                                        }
                                    }
                                }
                            }
                            gated[g] = short;
                        }
                    }
                    WorkloadMode::SparseImbalanced => {
                        for a in 0..layer.h_k {
                            for b in 0..layer.w_k {
                                let mut max = 0u64;
                                let mut sum = 0u64;
                                for o in 0..ocs {
                                    for i in 0..ics {
                                        let idx =
                                            enc.index(d * plan.n_pe + o, e * plan.n_pe + i, a, b);
                                        let c = enc.nnzb_of(idx) as u64;
                                        max = max.max(c);
                                        sum += c;
                                    }
                                }
                                step[g] += max;
                                busy[g] += sum;
                                idle_active[g] += max * resident - sum;
                            }
                        }
                    }
                }
            }
        }
        Self {
            t_ic: plan.t_ic,
            step,
            busy,
            gated,
            idle_active,
        }
    }

    #[inline]
    fn group(&self, pass: &TilePass) -> usize {
        pass.oc_tile * self.t_ic + pass.ic_tile
    }
}

/// Output pixels advanced per lockstep step: pairs in 8-bit mode.
#[inline]
fn pixel_steps(out_pixels: usize, precision: Precision) -> u64 {
    match precision {
        Precision::Bits16 => out_pixels as u64,
        Precision::Bits8 => out_pixels.div_ceil(2) as u64,
    }
}

fn check_inputs(
    layer: &LayerSpec,
    enc: &EncodedLayer,
    plan: &TilingPlan,
    arch: &ArchConfig,
) -> Result<()> {
    if enc.dims != layer.weight_dims() || enc.precision != layer.precision {
        return Err(Error::PlanMismatch(format!(
            "encoded layer {:?}@{} does not match layer {:?}@{}",
            enc.dims,
            enc.precision,
            layer.weight_dims(),
            layer.precision
        )));
    }
    if !plan.matches(layer, arch) {
        return Err(Error::PlanMismatch(
            "tiling plan was built for a different layer or arch".into(),
        ));
    }
    if plan.dataflow.is_none() {
        return Err(Error::PlanMismatch("dataflow not chosen yet".into()));
    }
    if layer.kind == LayerKind::Conv {
        // the IFM tile (halo included) must fit a row's buffer phase
        let max_rows = plan.rows.in_count.iter().max().copied().unwrap_or(0);
        let max_cols = plan.cols.in_count.iter().max().copied().unwrap_or(0);
        let bits = max_rows * max_cols * layer.precision.bits() as usize;
        let words = bits.div_ceil(16);
        if words > arch.ifm_weight_buffer_words {
            return Err(Error::BufferOverflow {
                what: "IFM tile",
                needed: words,
                capacity: arch.ifm_weight_buffer_words,
            });
        }
        // one tile's partial sums must fit a column's output buffer phase
        let psum_words = plan.h_is * plan.w_is * layer.precision.psum_bits() as usize / 16;
        if psum_words > arch.output_buffer_words {
            return Err(Error::BufferOverflow {
                what: "psum tile",
                needed: psum_words,
                capacity: arch.output_buffer_words,
            });
        }
    }
    Ok(())
}

/// Cycle model of a convolution layer (array-mapped).
fn conv_timing(
    layer: &LayerSpec,
    enc: &EncodedLayer,
    plan: &TilingPlan,
    mode: WorkloadMode,
    arch: &ArchConfig,
) -> Result<CycleReport> {
    let costs = PassCosts::build(layer, enc, plan, mode);
    let passes = schedule(plan, layer)?;
    let format = mode.weight_format(enc.n_max);
    let ramp = (arch.n_pe - 1) as u64;
    let all_pes = (arch.n_pe * arch.n_pe) as u64;

    let mut compute = 0u64;
    let mut fill_drain = 0u64;
    let mut stall = 0u64;
    let mut busy = 0u64;
    let mut idle = 0u64;
    let mut gated = 0u64;

    // initial ping-pong fill is fully exposed
    if let Some(first) = passes.iter().find(|p| p.out_pixels() > 0) {
        stall += pass_refill_words(first, plan, layer, format)
            .div_ceil(arch.dram_words_per_cycle as u64);
    }

    let active: Vec<&TilePass> = passes.iter().filter(|p| p.out_pixels() > 0).collect();
    for (i, pass) in active.iter().enumerate() {
        let g = costs.group(pass);
        let steps = pixel_steps(pass.out_pixels(), layer.precision);
        let pass_compute = steps * costs.step[g];
        let window = ramp + pass_compute + ramp;

        compute += pass_compute;
        fill_drain += 2 * ramp;
        busy += steps * costs.busy[g];
        gated += steps * costs.gated[g];
        // in-compute idle of resident PEs plus everything the rest of the
        // array and the ramps sit out
        let resident = (pass.oc_count * pass.ic_count) as u64;
        idle += steps * costs.idle_active[g];
        idle += (all_pes - resident) * pass_compute;
        idle += all_pes * 2 * ramp;

        if let Some(next) = active.get(i + 1) {
            let refill = pass_refill_words(next, plan, layer, format)
                .div_ceil(arch.dram_words_per_cycle as u64);
            stall += refill.saturating_sub(window);
        }
    }
    idle += all_pes * stall;

    let total = compute + fill_drain + stall;
    debug_assert_eq!(busy + idle, all_pes * total);
    Ok(CycleReport {
        total_cycles: total,
        compute_cycles: compute,
        fill_drain_cycles: fill_drain,
        stall_cycles: stall,
        pe_busy_cycles: busy,
        pe_idle_cycles: idle,
        utilization: if total == 0 {
            0.0
        } else {
            busy as f64 / (busy + idle) as f64
        },
        gated_step_count: gated,
    })
}

/// Cycle model of an FC layer.
///
/// GEMV has no weight reuse, so FC layers map to a single PE column and are
/// bounded by whichever is larger: streaming the weights in, or the
/// column's shift-add work. The 8-bit lane pairing buys nothing here (one
/// output pixel per OC), so compute steps match 16-bit.
fn fc_timing(
    layer: &LayerSpec,
    enc: &EncodedLayer,
    plan: &TilingPlan,
    mode: WorkloadMode,
    arch: &ArchConfig,
) -> Result<CycleReport> {
    let format = mode.weight_format(enc.n_max);
    let ramp = (arch.n_pe - 1) as u64;
    let all_pes = (arch.n_pe * arch.n_pe) as u64;

    let mut compute = 0u64;
    let mut busy = 0u64;
    let mut gated = 0u64;
    for oc in 0..layer.n_oc {
        for e in 0..plan.t_ic {
            let ics = plan.ic_count(e, layer) as u64;
            let (step, col_busy, col_gated, _col_idle) =
                fc_column_step(layer, enc, plan, mode, oc, e, ics);
            compute += step;
            busy += col_busy;
            gated += col_gated;
        }
    }

    let weight_words =
        (layer.weight_count() as u64 * format.bits_per_weight(layer) as u64).div_ceil(16);
    let load = weight_words.div_ceil(arch.dram_words_per_cycle as u64);
    let stall = load.saturating_sub(compute);
    let fill_drain = 2 * ramp;
    let total = compute + stall + fill_drain;

    // one active column: everything else idles, plus ramps and stalls
    let idle = all_pes * total - busy;

    debug_assert_eq!(busy + idle, all_pes * total);
    Ok(CycleReport {
        total_cycles: total,
        compute_cycles: compute,
        fill_drain_cycles: fill_drain,
        stall_cycles: stall,
        pe_busy_cycles: busy,
        pe_idle_cycles: idle,
        utilization: if total == 0 {
            0.0
        } else {
            busy as f64 / (busy + idle) as f64
        },
        gated_step_count: gated,
    })
}

fn fc_column_step(
    layer: &LayerSpec,
    enc: &EncodedLayer,
    plan: &TilingPlan,
    mode: WorkloadMode,
    oc: usize,
    e: usize,
    ics: u64,
) -> (u64, u64, u64, u64) {
    match mode {
        WorkloadMode::DenseBitSerial => {
            let step = layer.precision.bits() as u64;
            (step, step * ics, 0, 0)
        }
        WorkloadMode::SparseBalanced => {
            let step = enc.n_max as u64;
            let mut short = 0u64;
            for i in 0..ics as usize {
                let idx = enc.index(oc, e * plan.n_pe + i, 0, 0);
                short += enc.n_max as u64 - enc.nnzb_of(idx) as u64;
            }
            (step, step * ics, short, 0)
        }
        WorkloadMode::SparseImbalanced => {
            let mut max = 0u64;
            let mut sum = 0u64;
            for i in 0..ics as usize {
                let idx = enc.index(oc, e * plan.n_pe + i, 0, 0);
                let c = enc.nnzb_of(idx) as u64;
                max = max.max(c);
                sum += c;
            }
            (max, sum, 0, max * ics - sum)
        }
    }
}

/// Timing only: no IFM needed.
pub fn simulate_layer_timing(
    layer: &LayerSpec,
    enc: &EncodedLayer,
    plan: &TilingPlan,
    mode: WorkloadMode,
    arch: &ArchConfig,
) -> Result<CycleReport> {
    check_inputs(layer, enc, plan, arch)?;
    match layer.kind {
        LayerKind::Conv => conv_timing(layer, enc, plan, mode, arch),
        LayerKind::Fc => fc_timing(layer, enc, plan, mode, arch),
    }
}

/// Functional pass through the tile schedule. Produces the pre-pooling OFM
/// and asserts partial-sum locality: every output element is accumulated
/// across all its IC tiles and written exactly once.
fn conv_functional(
    ifm: &FixedTensor,
    layer: &LayerSpec,
    enc: &EncodedLayer,
    plan: &TilingPlan,
) -> Result<FixedTensor> {
    let (h_o, w_o) = output_dims(layer)?;
    let passes = schedule(plan, layer)?;
    let psum_bits = layer.precision.psum_bits();
    let mut out = vec![0i32; layer.n_oc * h_o * w_o];
    let mut written = vec![false; layer.n_oc * h_o * w_o];

    // open accumulation buffer for the (spatial tile, oc tile) in flight
    let mut open: Option<(usize, usize, usize, Vec<Psum>)> = None;

    for pass in &passes {
        if pass.out_pixels() == 0 {
            continue;
        }
        let key = (pass.tile_x, pass.tile_y, pass.oc_tile);
        let buf = match &mut open {
            Some((x, y, o, buf)) if (*x, *y, *o) == key => {
                assert!(pass.ic_tile > 0, "tile revisited after eviction");
                buf
            }
            Some(_) => panic!("partial sums evicted before their reduction completed"),
            None => {
                assert_eq!(pass.ic_tile, 0, "tile must start at IC tile 0");
                open = Some((
                    key.0,
                    key.1,
                    key.2,
                    vec![Psum::new(psum_bits); pass.oc_count * pass.out_pixels()],
                ));
                &mut open.as_mut().unwrap().3
            }
        };

        // weight-major accumulation; adding the decoded product once is
        // identical mod 2^width to the per-slot shift-adds the PEs perform
        // (the event model does them slot by slot and must agree)
        for o in 0..pass.oc_count {
            let oc = pass.oc_tile * plan.n_pe + o;
            for i in 0..pass.ic_count {
                let ic = pass.ic_tile * plan.n_pe + i;
                for a in 0..layer.h_k {
                    for b in 0..layer.w_k {
                        let w = enc.decode_at(enc.index(oc, ic, a, b)) as i64;
                        if w == 0 {
                            continue;
                        }
                        for (pi, (x, y)) in pixel_iter(pass).enumerate() {
                            let iv = ifm.at3(ic, x * layer.stride + a, y * layer.stride + b) as i64;
                            buf[o * pass.out_pixels() + pi].add(iv * w);
                        }
                    }
                }
            }
        }

        // reduction complete after the last IC tile: evict to the OFM
        if pass.ic_tile == plan.t_ic - 1 {
            let (_, _, _, buf) = open.take().unwrap();
            for (pi, (x, y)) in pixel_iter(pass).enumerate() {
                for o in 0..pass.oc_count {
                    let oc = pass.oc_tile * plan.n_pe + o;
                    let flat = (oc * h_o + x) * w_o + y;
                    assert!(!written[flat], "output element written twice");
                    written[flat] = true;
                    let shifted = buf[o * pass.out_pixels() + pi].value() >> layer.out_shift;
                    out[flat] = wrap_to_bits(shifted, layer.precision.bits()) as i32;
                }
            }
        }
    }
    assert!(
        written.iter().all(|&w| w),
        "schedule missed output elements"
    );
    FixedTensor::new(vec![layer.n_oc, h_o, w_o], layer.precision.bits(), out)
}

/// Output coordinates of a pass, row-major within the tile.
fn pixel_iter(pass: &TilePass) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..pass.out_h).flat_map(move |dx| {
        (0..pass.out_w).map(move |dy| (pass.first_out_x + dx, pass.first_out_y + dy))
    })
}

/// Full layer simulation: functional OFM (post ReLU/pooling) plus timing.
pub fn simulate_layer(
    ifm: &FixedTensor,
    layer: &LayerSpec,
    enc: &EncodedLayer,
    plan: &TilingPlan,
    mode: WorkloadMode,
    arch: &ArchConfig,
) -> Result<(FixedTensor, CycleReport)> {
    check_inputs(layer, enc, plan, arch)?;
    if ifm.dims() != [layer.n_ic, layer.h_i, layer.w_i] {
        return Err(Error::ShapeMismatch(format!(
            "IFM dims {:?} do not match layer input {}x{}x{}",
            ifm.dims(),
            layer.n_ic,
            layer.h_i,
            layer.w_i
        )));
    }
    let raw = conv_functional(ifm, layer, enc, plan)?;
    let ofm = relu_pool(&raw, layer)?;
    let report = simulate_layer_timing(layer, enc, plan, mode, arch)?;
    Ok((ofm, report))
}

/// Builds a plan (tiling plus traffic-optimal dataflow) for one layer.
pub fn plan_layer(
    layer: &LayerSpec,
    arch: &ArchConfig,
    mode: WorkloadMode,
    n_max: u8,
) -> Result<TilingPlan> {
    let mut plan = tile_layer(layer, arch)?;
    plan.dataflow = Some(choose_dataflow(layer, &plan, mode.weight_format(n_max))?);
    Ok(plan)
}

/// Result of simulating one network end to end.
pub struct NetworkSim {
    pub report: NetworkCycleReport,
    /// Per-layer inputs as consumed (chained OFM or seeded).
    pub ifms: Vec<FixedTensor>,
    /// Per-layer post-processed OFMs.
    pub ofms: Vec<FixedTensor>,
    pub dataflows: Vec<Dataflow>,
}

/// Layer-wise sequential execution. When a layer's input shape matches the
/// previous layer's (post-pooling) output it consumes that OFM; otherwise a
/// fresh deterministic IFM is drawn from `seed` (shape tables of branching
/// networks are simulated layer by layer).
pub fn simulate_network(
    net: &NetworkSpec,
    encoded: &[EncodedLayer],
    input: Option<&FixedTensor>,
    seed: u64,
    arch: &ArchConfig,
    mode: WorkloadMode,
) -> Result<NetworkSim> {
    if encoded.len() != net.layers.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} encoded layers for {} network layers",
            encoded.len(),
            net.layers.len()
        )));
    }
    let mut reports = Vec::with_capacity(net.layers.len());
    let mut ifms: Vec<FixedTensor> = Vec::with_capacity(net.layers.len());
    let mut ofms: Vec<FixedTensor> = Vec::with_capacity(net.layers.len());
    let mut dataflows = Vec::with_capacity(net.layers.len());
    let mut prev: Option<FixedTensor> = input.cloned();

    for (idx, layer) in net.layers.iter().enumerate() {
        let enc = &encoded[idx];
        let want = [layer.n_ic, layer.h_i, layer.w_i];
        let ifm = match prev.take() {
            Some(t) if t.dims() == want && t.bitwidth() == layer.precision.bits() => t,
            Some(t)
                if t.len() == want.iter().product::<usize>()
                    && layer.kind == LayerKind::Fc
                    && t.bitwidth() == layer.precision.bits() =>
            {
                // FC flattens the previous feature map
                FixedTensor::new(want.to_vec(), t.bitwidth(), t.data().to_vec())?
            }
            _ => gen::gen_ifm(
                &want,
                layer.precision,
                seed ^ (idx as u64).wrapping_mul(0x9e37),
            ),
        };
        let plan = plan_layer(layer, arch, mode, enc.n_max)?;
        let (ofm, report) = simulate_layer(&ifm, layer, enc, &plan, mode, arch)?;
        dataflows.push(plan.dataflow.unwrap());
        reports.push(report);
        prev = Some(ofm.clone());
        ifms.push(ifm);
        ofms.push(ofm);
    }

    let total: u64 = reports.iter().map(|r| r.total_cycles).sum();
    Ok(NetworkSim {
        report: NetworkCycleReport {
            layers: reports,
            total_cycles: total,
            frames_per_second: if total == 0 {
                0.0
            } else {
                arch.clock_hz / total as f64
            },
        },
        ifms,
        ofms,
        dataflows,
    })
}
