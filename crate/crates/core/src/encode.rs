//! Weight encoding: length, sign, bit positions, bitmap.
//!
//! A quantized weight is stored as its sign plus the indices of its nonzero
//! magnitude bits, most significant first. Every weight of a layer carries
//! exactly `n_max` position slots (the "length", stored once per layer); a
//! per-slot bitmap marks which slots are real. Position fields are 4 bits
//! wide at 16-bit precision and 3 bits at 8-bit.
//!
//! `pack_layer` lays encoded layers out the way the on-chip weight buffer
//! stores them: three separate streams of 16-bit words holding 16 signs,
//! 16 bitmap bits, or 4 (16-bit) / 5 (8-bit) position fields per word.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quant::nnzb;
use crate::tensor::{FixedTensor, Precision};

/// Hard upper bound on position slots per weight (n_max <= precision <= 16).
pub const MAX_SLOTS: usize = 16;

/// One weight in encoded form.
///
/// `positions[k]` for k < valid count holds the k-th most significant
/// nonzero bit index; remaining slots are zero-filled. Bit k of `bitmap` is
/// set iff slot k is valid, so valid slots always form a prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodedWeight {
    pub sign: bool,
    pub n_max: u8,
    pub positions: [u8; MAX_SLOTS],
    pub bitmap: u16,
}

impl EncodedWeight {
    /// Count of valid slots = NNZB of the decoded magnitude.
    pub fn valid_count(&self) -> u32 {
        self.bitmap.count_ones()
    }

    /// Bitmap spelled slot 0 first, the way the format is usually drawn.
    pub fn bitmap_string(&self) -> String {
        (0..self.n_max)
            .map(|k| if self.bitmap >> k & 1 == 1 { '1' } else { '0' })
            .collect()
    }
}

/// Bits one encoded weight occupies: sign + bitmap + position fields.
pub fn bits_per_weight(precision: Precision, n_max: u8) -> u32 {
    assert!(n_max >= 1 && n_max <= precision.bits());
    1 + n_max as u32 + n_max as u32 * precision.position_bits() as u32
}

/// Encodes an already-quantized weight. Fails if the weight still has more
/// nonzero bits than `n_max`.
pub fn encode_weight(w: i32, precision: Precision, n_max: u8) -> Result<EncodedWeight> {
    assert!(n_max >= 1 && n_max <= precision.bits());
    let count = nnzb(w);
    if count > n_max as u32 {
        return Err(Error::NotQuantized {
            nnzb: count,
            n_max: n_max as u32,
        });
    }
    let mag = w.unsigned_abs();
    let mut positions = [0u8; MAX_SLOTS];
    let mut slot = 0;
    for bit in (0..32 - mag.leading_zeros()).rev() {
        if mag >> bit & 1 == 1 {
            positions[slot] = bit as u8;
            slot += 1;
        }
    }
    Ok(EncodedWeight {
        sign: w < 0,
        n_max,
        positions,
        bitmap: (1u16 << count) - 1,
    })
}

/// Sum of 2^position over valid slots, negated when the sign bit is set.
pub fn decode_weight(e: &EncodedWeight) -> i32 {
    let mut mag = 0i32;
    for k in 0..e.n_max as usize {
        if e.bitmap >> k & 1 == 1 {
            mag += 1 << e.positions[k];
        }
    }
    if e.sign {
        -mag
    } else {
        mag
    }
}

/// All weights of one layer in encoded form, flat in [Co, Ci, Hk, Wk] order.
///
/// Storage is columnar (signs, valid counts, position slots) so that large
/// layers stay compact; `weight(i)` materializes the `EncodedWeight` view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedLayer {
    pub n_max: u8,
    pub precision: Precision,
    pub dims: [usize; 4],
    signs: Vec<u64>,
    nnzbs: Vec<u8>,
    positions: Vec<u8>,
}

impl EncodedLayer {
    /// Encodes a quantized weight tensor of shape [Co, Ci, Hk, Wk].
    pub fn from_tensor(t: &FixedTensor, n_max: u8) -> Result<Self> {
        if t.dims().len() != 4 {
            return Err(Error::ShapeMismatch(format!(
                "weight tensor must be 4-d, got {:?}",
                t.dims()
            )));
        }
        let precision = t.precision();
        assert!(n_max >= 1 && n_max <= precision.bits());
        let count = t.len();
        let mut signs = vec![0u64; count.div_ceil(64)];
        let mut nnzbs = vec![0u8; count];
        let mut positions = vec![0u8; count * n_max as usize];
        for (i, &w) in t.data().iter().enumerate() {
            let c = nnzb(w);
            if c > n_max as u32 {
                return Err(Error::NotQuantized {
                    nnzb: c,
                    n_max: n_max as u32,
                });
            }
            if w < 0 {
                signs[i / 64] |= 1 << (i % 64);
            }
            nnzbs[i] = c as u8;
            let mag = w.unsigned_abs();
            let base = i * n_max as usize;
            let mut slot = 0;
            for bit in (0..32 - mag.leading_zeros()).rev() {
                if mag >> bit & 1 == 1 {
                    positions[base + slot] = bit as u8;
                    slot += 1;
                }
            }
        }
        Ok(Self {
            n_max,
            precision,
            dims: [t.dims()[0], t.dims()[1], t.dims()[2], t.dims()[3]],
            signs,
            nnzbs,
            positions,
        })
    }

    pub fn weight_count(&self) -> usize {
        self.nnzbs.len()
    }

    pub fn total_bits(&self) -> u64 {
        self.weight_count() as u64 * bits_per_weight(self.precision, self.n_max) as u64
    }

    #[inline]
    pub fn sign(&self, i: usize) -> bool {
        self.signs[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn nnzb_of(&self, i: usize) -> u8 {
        self.nnzbs[i]
    }

    #[inline]
    pub fn position_slots(&self, i: usize) -> &[u8] {
        let n = self.n_max as usize;
        &self.positions[i * n..(i + 1) * n]
    }

    pub fn weight(&self, i: usize) -> EncodedWeight {
        let mut positions = [0u8; MAX_SLOTS];
        positions[..self.n_max as usize].copy_from_slice(self.position_slots(i));
        EncodedWeight {
            sign: self.sign(i),
            n_max: self.n_max,
            positions,
            bitmap: (1u16 << self.nnzbs[i]) - 1,
        }
    }

    /// Decodes weight `i` without building the intermediate view.
    #[inline]
    pub fn decode_at(&self, i: usize) -> i32 {
        let mut mag = 0i32;
        for k in 0..self.nnzbs[i] as usize {
            mag += 1 << self.positions[i * self.n_max as usize + k];
        }
        if self.sign(i) {
            -mag
        } else {
            mag
        }
    }

    /// Rebuilds the quantized weight tensor this layer encodes.
    pub fn decode_tensor(&self) -> FixedTensor {
        let data: Vec<i32> = (0..self.weight_count())
            .map(|i| self.decode_at(i))
            .collect();
        FixedTensor::new(self.dims.to_vec(), self.precision.bits(), data)
            .expect("decoded weights fit the precision")
    }

    /// Flat weight index for [o, i, a, b].
    #[inline]
    pub fn index(&self, o: usize, i: usize, a: usize, b: usize) -> usize {
        ((o * self.dims[1] + i) * self.dims[2] + a) * self.dims[3] + b
    }
}

/// Packed on-chip image of one encoded layer: three 16-bit word streams.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WeightBufferImage {
    pub sign_words: Vec<u16>,
    pub bitmap_words: Vec<u16>,
    pub position_words: Vec<u16>,
}

impl WeightBufferImage {
    pub fn word_count(&self) -> usize {
        self.sign_words.len() + self.bitmap_words.len() + self.position_words.len()
    }
}

/// Metadata needed to unpack a `WeightBufferImage`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PackMeta {
    pub precision: Precision,
    pub n_max: u8,
    pub dims: [usize; 4],
}

impl PackMeta {
    pub fn of(layer: &EncodedLayer) -> Self {
        Self {
            precision: layer.precision,
            n_max: layer.n_max,
            dims: layer.dims,
        }
    }

    pub fn weight_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn sign_word_count(&self) -> usize {
        self.weight_count().div_ceil(16)
    }

    pub fn bitmap_word_count(&self) -> usize {
        (self.weight_count() * self.n_max as usize).div_ceil(16)
    }

    pub fn position_word_count(&self) -> usize {
        (self.weight_count() * self.n_max as usize).div_ceil(self.precision.positions_per_word())
    }
}

/// Packs the three field streams into 16-bit words.
///
/// Signs and bitmap bits fill words LSB first. Position fields fill words
/// from the LSB in 4-bit (16-bit precision) or 3-bit (8-bit precision)
/// lanes; the one leftover bit of the 8-bit layout is the word's MSB and
/// stays zero.
pub fn pack_layer(enc: &EncodedLayer) -> WeightBufferImage {
    let n = enc.weight_count();
    let n_max = enc.n_max as usize;
    let meta = PackMeta::of(enc);

    let mut sign_words = vec![0u16; meta.sign_word_count()];
    for i in 0..n {
        if enc.sign(i) {
            sign_words[i / 16] |= 1 << (i % 16);
        }
    }

    let mut bitmap_words = vec![0u16; meta.bitmap_word_count()];
    for i in 0..n {
        let valid = enc.nnzbs[i] as usize;
        for k in 0..valid {
            let bit = i * n_max + k;
            bitmap_words[bit / 16] |= 1 << (bit % 16);
        }
    }

    let ppw = enc.precision.positions_per_word();
    let pbits = enc.precision.position_bits() as usize;
    let mut position_words = vec![0u16; meta.position_word_count()];
    for i in 0..n {
        for k in 0..n_max {
            let field = i * n_max + k;
            let lane = field % ppw;
            position_words[field / ppw] |= (enc.positions[i * n_max + k] as u16) << (lane * pbits);
        }
    }

    WeightBufferImage {
        sign_words,
        bitmap_words,
        position_words,
    }
}

/// Exact inverse of `pack_layer` given matching metadata.
pub fn unpack_layer(img: &WeightBufferImage, meta: &PackMeta) -> Result<EncodedLayer> {
    let n = meta.weight_count();
    let n_max = meta.n_max as usize;
    for (stream, have, need) in [
        ("sign", img.sign_words.len(), meta.sign_word_count()),
        ("bitmap", img.bitmap_words.len(), meta.bitmap_word_count()),
        (
            "position",
            img.position_words.len(),
            meta.position_word_count(),
        ),
    ] {
        if have < need {
            return Err(Error::BufferUnderrun {
                stream,
                needed: need,
                available: have,
            });
        }
    }

    let mut signs = vec![0u64; n.div_ceil(64)];
    let mut nnzbs = vec![0u8; n];
    let mut positions = vec![0u8; n * n_max];
    let ppw = meta.precision.positions_per_word();
    let pbits = meta.precision.position_bits() as usize;
    let pmask = (1u16 << pbits) - 1;

    for i in 0..n {
        if img.sign_words[i / 16] >> (i % 16) & 1 == 1 {
            signs[i / 64] |= 1 << (i % 64);
        }
        let mut valid = 0u8;
        for k in 0..n_max {
            let bit = i * n_max + k;
            if img.bitmap_words[bit / 16] >> (bit % 16) & 1 == 1 {
                valid += 1;
                let field = i * n_max + k;
                let lane = field % ppw;
                positions[i * n_max + k] =
                    (img.position_words[field / ppw] >> (lane * pbits) & pmask) as u8;
            }
        }
        nnzbs[i] = valid;
    }

    Ok(EncodedLayer {
        n_max: meta.n_max,
        precision: meta.precision,
        dims: meta.dims,
        signs,
        nnzbs,
        positions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quant::quantize_weight;
    use proptest::prelude::*;

    #[test]
    fn bits_per_weight_reference_points() {
        assert_eq!(bits_per_weight(Precision::Bits16, 3), 16);
        assert_eq!(bits_per_weight(Precision::Bits16, 4), 21);
        assert_eq!(bits_per_weight(Precision::Bits8, 4), 17);
        assert_eq!(bits_per_weight(Precision::Bits8, 5), 21);
    }

    #[test]
    fn encode_examples() {
        let e = encode_weight(92, Precision::Bits8, 4).unwrap();
        assert!(!e.sign);
        assert_eq!(&e.positions[..4], &[6, 4, 3, 2]);
        assert_eq!(e.bitmap_string(), "1111");

        let e = encode_weight(80, Precision::Bits8, 4).unwrap();
        assert_eq!(&e.positions[..4], &[6, 4, 0, 0]);
        assert_eq!(e.bitmap_string(), "1100");

        let e = encode_weight(0, Precision::Bits16, 3).unwrap();
        assert!(!e.sign);
        assert_eq!(&e.positions[..3], &[0, 0, 0]);
        assert_eq!(e.bitmap_string(), "000");

        assert!(matches!(
            encode_weight(93, Precision::Bits8, 4),
            Err(Error::NotQuantized { nnzb: 5, n_max: 4 })
        ));
    }

    #[test]
    fn decode_examples() {
        let mut e = encode_weight(92, Precision::Bits8, 4).unwrap();
        e.sign = true;
        assert_eq!(decode_weight(&e), -92);
        let z = encode_weight(0, Precision::Bits16, 3).unwrap();
        assert_eq!(decode_weight(&z), 0);
    }

    #[test]
    fn roundtrip_exhaustive_8bit_all_caps() {
        for n_max in 1..=8u8 {
            for w in -128i32..=127 {
                let q = quantize_weight(w, n_max as u32);
                let e = encode_weight(q, Precision::Bits8, n_max).unwrap();
                assert_eq!(decode_weight(&e), q, "w={w} n_max={n_max}");
            }
        }
    }

    fn encoded_layer(values: &[i32], bitwidth: u8, n_max: u8) -> EncodedLayer {
        let t = FixedTensor::new(vec![values.len(), 1, 1, 1], bitwidth, values.to_vec()).unwrap();
        EncodedLayer::from_tensor(&t, n_max).unwrap()
    }

    #[test]
    fn layer_total_bits() {
        let enc = encoded_layer(&[92, -92, 80, 0], 8, 4);
        assert_eq!(enc.total_bits(), 4 * 17);
        assert_eq!(enc.weight(1).bitmap_string(), "1111");
        assert_eq!(enc.decode_at(1), -92);
    }

    #[test]
    fn pack_word_counts() {
        // 16 weights, 16-bit, n_max=3: 1 sign word, 3 bitmap words, 12 position words.
        let enc = encoded_layer(&[5i32; 16], 16, 3);
        let img = pack_layer(&enc);
        assert_eq!(img.sign_words.len(), 1);
        assert_eq!(img.bitmap_words.len(), 3);
        assert_eq!(img.position_words.len(), 12);

        // A single weight still occupies whole words.
        let one = encoded_layer(&[5], 16, 3);
        let img1 = pack_layer(&one);
        assert_eq!(img1.sign_words.len(), 1);
        assert_eq!(img1.bitmap_words.len(), 1);
        assert_eq!(img1.position_words.len(), 1);

        // 8-bit, n_max=5, 5 weights: 25 position fields at 5 per word.
        let enc = encoded_layer(&[21, -21, 21, 21, 21], 8, 5);
        let img = pack_layer(&enc);
        assert_eq!(img.position_words.len(), 5);
        // 5 lanes x 3 bits leaves the MSB unused and zero.
        for w in &img.position_words {
            assert_eq!(w >> 15, 0);
        }
    }

    #[test]
    fn unpack_inverts_pack() {
        let enc = encoded_layer(&[92, -92, 80, 0, -1, 64, 3, -96], 8, 4);
        let img = pack_layer(&enc);
        let back = unpack_layer(&img, &PackMeta::of(&enc)).unwrap();
        assert_eq!(back, enc);
    }

    #[test]
    fn empty_layer_roundtrip() {
        let enc = encoded_layer(&[], 16, 3);
        let img = pack_layer(&enc);
        assert_eq!(img.word_count(), 0);
        let back = unpack_layer(&img, &PackMeta::of(&enc)).unwrap();
        assert_eq!(back, enc);
    }

    #[test]
    fn truncated_image_is_underrun() {
        let enc = encoded_layer(&[7i32; 32], 16, 3);
        let mut img = pack_layer(&enc);
        img.position_words.pop();
        let err = unpack_layer(&img, &PackMeta::of(&enc)).unwrap_err();
        assert!(matches!(
            err,
            Error::BufferUnderrun {
                stream: "position",
                ..
            }
        ));
    }

    proptest! {
        #[test]
        fn pack_roundtrip_random_layers(
            values in prop::collection::vec(-32768i32..=32767, 0..300),
            n_max in 1u8..=6,
        ) {
            let quantized: Vec<i32> =
                values.iter().map(|&w| quantize_weight(w, n_max as u32)).collect();
            let t = FixedTensor::new(vec![quantized.len(), 1, 1, 1], 16, quantized).unwrap();
            let enc = EncodedLayer::from_tensor(&t, n_max).unwrap();
            let img = pack_layer(&enc);
            let meta = PackMeta::of(&enc);
            prop_assert_eq!(img.sign_words.len(), meta.sign_word_count());
            prop_assert_eq!(img.bitmap_words.len(), meta.bitmap_word_count());
            prop_assert_eq!(img.position_words.len(), meta.position_word_count());
            let back = unpack_layer(&img, &meta).unwrap();
            prop_assert_eq!(back, enc);
        }

        #[test]
        fn encode_decode_identity_16bit(w in -32768i32..=32767, n_max in 1u8..=16) {
            let q = quantize_weight(w, n_max as u32);
            let e = encode_weight(q, Precision::Bits16, n_max).unwrap();
            prop_assert_eq!(decode_weight(&e), q);
            // valid slots strictly decreasing
            let v = e.valid_count() as usize;
            for k in 1..v {
                prop_assert!(e.positions[k] < e.positions[k - 1]);
            }
            // invalid slots zero-filled
            for k in v..e.n_max as usize {
                prop_assert_eq!(e.positions[k], 0);
            }
        }
    }
}
