//! Integer tensors with a declared bitwidth.
//!
//! All feature maps and weights in the model are fixed-point signed integers
//! of 8 or 16 bits. `FixedTensor` stores them flat in row-major order and
//! rejects any element outside the declared range at construction time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Operand width of a layer: 8-bit or 16-bit fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Precision {
    #[serde(rename = "8")]
    Bits8,
    #[serde(rename = "16")]
    Bits16,
}

impl Precision {
    pub fn from_bits(bits: u8) -> Option<Self> {
        match bits {
            8 => Some(Precision::Bits8),
            16 => Some(Precision::Bits16),
            _ => None,
        }
    }

    /// Operand width in bits.
    pub const fn bits(self) -> u8 {
        match self {
            Precision::Bits8 => 8,
            Precision::Bits16 => 16,
        }
    }

    /// Width of the partial-sum accumulator for this operand width.
    pub const fn psum_bits(self) -> u8 {
        match self {
            Precision::Bits8 => 16,
            Precision::Bits16 => 32,
        }
    }

    /// Bits of one encoded position field (index into the magnitude bits).
    pub const fn position_bits(self) -> u8 {
        match self {
            Precision::Bits8 => 3,
            Precision::Bits16 => 4,
        }
    }

    /// Encoded position fields per 16-bit buffer word. The 8-bit layout
    /// leaves one pad bit at the word's MSB.
    pub const fn positions_per_word(self) -> usize {
        match self {
            Precision::Bits8 => 5,
            Precision::Bits16 => 4,
        }
    }

    pub const fn min_value(self) -> i64 {
        -(1i64 << (self.bits() - 1))
    }

    pub const fn max_value(self) -> i64 {
        (1i64 << (self.bits() - 1)) - 1
    }
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}b", self.bits())
    }
}

/// Flat integer tensor with a declared element bitwidth.
///
/// `dims` is outermost-first, e.g. `[C, H, W]` for feature maps or
/// `[Co, Ci, Hk, Wk]` for weights; `data` is row-major. Elements are stored
/// as `i32` but every one is checked against the declared bitwidth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedTensor {
    dims: Vec<usize>,
    bitwidth: u8,
    data: Vec<i32>,
}

impl FixedTensor {
    pub fn new(dims: Vec<usize>, bitwidth: u8, data: Vec<i32>) -> Result<Self> {
        assert!(bitwidth == 8 || bitwidth == 16, "bitwidth must be 8 or 16");
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::DimsDataMismatch {
                dims,
                expected,
                actual: data.len(),
            });
        }
        let lo = -(1i64 << (bitwidth - 1));
        let hi = (1i64 << (bitwidth - 1)) - 1;
        for (index, &v) in data.iter().enumerate() {
            if (v as i64) < lo || (v as i64) > hi {
                return Err(Error::ValueOutOfRange {
                    value: v as i64,
                    index,
                    bitwidth,
                });
            }
        }
        Ok(Self {
            dims,
            bitwidth,
            data,
        })
    }

    pub fn zeros(dims: Vec<usize>, bitwidth: u8) -> Self {
        let len = dims.iter().product();
        Self::new(dims, bitwidth, vec![0; len]).expect("zeros are always in range")
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn bitwidth(&self) -> u8 {
        self.bitwidth
    }

    pub fn precision(&self) -> Precision {
        Precision::from_bits(self.bitwidth).expect("checked at construction")
    }

    pub fn data(&self) -> &[i32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Element of a 3-d tensor indexed as [c, y, x].
    #[inline]
    pub fn at3(&self, c: usize, y: usize, x: usize) -> i32 {
        debug_assert_eq!(self.dims.len(), 3);
        self.data[(c * self.dims[1] + y) * self.dims[2] + x]
    }

    /// Element of a 4-d tensor indexed as [o, i, a, b].
    #[inline]
    pub fn at4(&self, o: usize, i: usize, a: usize, b: usize) -> i32 {
        debug_assert_eq!(self.dims.len(), 4);
        self.data[((o * self.dims[1] + i) * self.dims[2] + a) * self.dims[3] + b]
    }
}
