use thiserror::Error;

/// Errors produced by model construction, encoding, and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("element {value} at index {index} does not fit {bitwidth}-bit signed range")]
    ValueOutOfRange {
        value: i64,
        index: usize,
        bitwidth: u8,
    },

    #[error("dims {dims:?} describe {expected} elements but data has {actual}")]
    DimsDataMismatch {
        dims: Vec<usize>,
        expected: usize,
        actual: usize,
    },

    #[error("kernel exceeds input: kernel {kernel}x{kernel_w} on input {input}x{input_w}")]
    KernelExceedsInput {
        kernel: usize,
        kernel_w: usize,
        input: usize,
        input_w: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("weight not quantized to n_max: nnzb {nnzb} exceeds {n_max}")]
    NotQuantized { nnzb: u32, n_max: u32 },

    #[error("buffer underrun: {stream} stream needs {needed} words, image has {available}")]
    BufferUnderrun {
        stream: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("{what} needs {needed} words but buffer holds {capacity}")]
    BufferOverflow {
        what: &'static str,
        needed: usize,
        capacity: usize,
    },

    #[error("tiling plan does not match layer: {0}")]
    PlanMismatch(String),

    #[error("pooling window {window} (stride {stride}) exceeds feature map {h}x{w}")]
    PoolExceedsOutput {
        window: usize,
        stride: usize,
        h: usize,
        w: usize,
    },

    #[error("runs compare different networks: {ours} vs {theirs}")]
    NetworkMismatch { ours: String, theirs: String },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("config parse error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
