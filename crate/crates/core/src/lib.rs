//! Functional and cycle-level model of a sparse bit-serial systolic NN
//! accelerator.
//!
//! The machine evaluates fixed-point CONV/FC layers as shift-add sequences
//! over the nonzero bits of each weight. Weights are first quantized so no
//! weight carries more than `n_nzb_max` nonzero bits, which makes every PE
//! finish a weight in the same number of cycles; they are then stored as
//! sign + bit positions + validity bitmap and processed in that form.
//!
//! Crate layout follows the pipeline:
//!
//! - [`tensor`], [`layer`], [`arch`]: shared data model.
//! - [`quant`]: bit-sparsity quantization and numeric-range analysis.
//! - [`encode`]: the sign/position/bitmap format and its packed buffer image.
//! - [`reference`]: golden convolution and MAC models, the correctness oracle.
//! - [`dataflow`]: tiling, loop-nest schedule, RIF/RWF choice, DRAM traffic.
//! - [`systolic`]: analytical cycle model of the PE array.
//! - [`event`]: per-cycle event model used to validate the analytical one.
//! - [`metrics`]: runtime/energy/efficiency reports and run comparisons.
//! - [`netcfg`], [`weightfile`], [`gen`]: configs, file formats, seeded data.

pub mod arch;
pub mod dataflow;
pub mod encode;
pub mod error;
pub mod event;
pub mod gen;
pub mod layer;
pub mod metrics;
pub mod netcfg;
pub mod quant;
pub mod reference;
pub mod systolic;
pub mod tensor;
pub mod weightfile;

pub use arch::ArchConfig;
pub use dataflow::{Dataflow, TilingPlan, TrafficReport, WeightFormat};
pub use encode::{EncodedLayer, EncodedWeight, WeightBufferImage};
pub use error::{Error, Result};
pub use layer::{LayerKind, LayerSpec, NetworkSpec, PoolSpec};
pub use metrics::{EnergyReport, RatioTable, RunRecord};
pub use systolic::{CycleReport, NetworkCycleReport, WorkloadMode};
pub use tensor::{FixedTensor, Precision};
