//! Binary file formats.
//!
//! Weight file: a 16-byte header (magic `NNWF`, version, layer count,
//! reserved word) followed by each layer's raw weights as little-endian
//! signed integers at the layer's precision, flat in [Co, Ci, Hk, Wk]
//! order. Shapes are not stored; reading requires the network config.
//!
//! Encoded file: magic `NNEF` header, then per layer a descriptor
//! (precision bits, n_max, dims) followed by its three packed streams
//! (signs, bitmaps, positions) as little-endian 16-bit words. Stream
//! lengths are implied by the descriptor.

use std::io::{Read, Write};
use std::path::Path;

use crate::encode::{pack_layer, unpack_layer, EncodedLayer, PackMeta};
use crate::error::{Error, Result};
use crate::layer::NetworkSpec;
use crate::tensor::{FixedTensor, Precision};

pub const WEIGHT_MAGIC: [u8; 4] = *b"NNWF";
pub const ENCODED_MAGIC: [u8; 4] = *b"NNEF";
pub const FORMAT_VERSION: u32 = 1;

fn write_header(w: &mut impl Write, magic: [u8; 4], layer_count: u32) -> Result<()> {
    w.write_all(&magic)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&layer_count.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    Ok(())
}

fn read_header(r: &mut impl Read, magic: [u8; 4], what: &str) -> Result<u32> {
    let mut buf = [0u8; 16];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format(format!("{what}: truncated header")))?;
    if buf[0..4] != magic {
        return Err(Error::Format(format!("{what}: bad magic")));
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{what}: unsupported version {version}"
        )));
    }
    Ok(u32::from_le_bytes(buf[8..12].try_into().unwrap()))
}

/// Serializes per-layer weight tensors to the raw weight format.
pub fn write_weights(tensors: &[FixedTensor], out: &mut impl Write) -> Result<()> {
    write_header(out, WEIGHT_MAGIC, tensors.len() as u32)?;
    for t in tensors {
        let mut bytes = Vec::with_capacity(t.len() * (t.bitwidth() as usize / 8));
        match t.precision() {
            Precision::Bits8 => {
                for &v in t.data() {
                    bytes.push(v as i8 as u8);
                }
            }
            Precision::Bits16 => {
                for &v in t.data() {
                    bytes.extend_from_slice(&(v as i16).to_le_bytes());
                }
            }
        }
        out.write_all(&bytes)?;
    }
    Ok(())
}

/// Reads weight tensors; shapes and precisions come from the network spec.
pub fn read_weights(net: &NetworkSpec, input: &mut impl Read) -> Result<Vec<FixedTensor>> {
    let count = read_header(input, WEIGHT_MAGIC, "weight file")?;
    if count as usize != net.layers.len() {
        return Err(Error::Format(format!(
            "weight file has {count} layers, network {} has {}",
            net.name,
            net.layers.len()
        )));
    }
    let mut tensors = Vec::with_capacity(net.layers.len());
    for (idx, layer) in net.layers.iter().enumerate() {
        let n = layer.weight_count();
        let bytes_per = layer.precision.bits() as usize / 8;
        let mut buf = vec![0u8; n * bytes_per];
        input
            .read_exact(&mut buf)
            .map_err(|_| Error::Format(format!("weight file: truncated at layer {idx}")))?;
        let data: Vec<i32> = match layer.precision {
            Precision::Bits8 => buf.iter().map(|&b| b as i8 as i32).collect(),
            Precision::Bits16 => buf
                .chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]) as i32)
                .collect(),
        };
        tensors.push(FixedTensor::new(
            layer.weight_dims().to_vec(),
            layer.precision.bits(),
            data,
        )?);
    }
    Ok(tensors)
}

fn write_words(out: &mut impl Write, words: &[u16]) -> Result<()> {
    let mut bytes = Vec::with_capacity(words.len() * 2);
    for &w in words {
        bytes.extend_from_slice(&w.to_le_bytes());
    }
    out.write_all(&bytes)?;
    Ok(())
}

fn read_words(input: &mut impl Read, count: usize, what: &str) -> Result<Vec<u16>> {
    let mut buf = vec![0u8; count * 2];
    input
        .read_exact(&mut buf)
        .map_err(|_| Error::Format(format!("encoded file: truncated {what} stream")))?;
    Ok(buf
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect())
}

/// Serializes encoded layers: per-layer descriptor plus packed streams.
pub fn write_encoded(layers: &[EncodedLayer], out: &mut impl Write) -> Result<()> {
    write_header(out, ENCODED_MAGIC, layers.len() as u32)?;
    for enc in layers {
        out.write_all(&[enc.precision.bits(), enc.n_max, 0, 0])?;
        for d in enc.dims {
            out.write_all(&(d as u32).to_le_bytes())?;
        }
        let img = pack_layer(enc);
        write_words(out, &img.sign_words)?;
        write_words(out, &img.bitmap_words)?;
        write_words(out, &img.position_words)?;
    }
    Ok(())
}

pub fn read_encoded(input: &mut impl Read) -> Result<Vec<EncodedLayer>> {
    let count = read_header(input, ENCODED_MAGIC, "encoded file")?;
    let mut layers = Vec::with_capacity(count as usize);
    for idx in 0..count {
        let mut desc = [0u8; 4];
        input.read_exact(&mut desc).map_err(|_| {
            Error::Format(format!("encoded file: truncated descriptor at layer {idx}"))
        })?;
        let precision = Precision::from_bits(desc[0]).ok_or_else(|| {
            Error::Format(format!(
                "encoded file: layer {idx} precision {} invalid",
                desc[0]
            ))
        })?;
        let n_max = desc[1];
        if n_max == 0 || n_max > precision.bits() {
            return Err(Error::Format(format!(
                "encoded file: layer {idx} n_max {n_max} out of range"
            )));
        }
        let mut dims = [0usize; 4];
        for d in &mut dims {
            let mut b = [0u8; 4];
            input.read_exact(&mut b).map_err(|_| {
                Error::Format(format!("encoded file: truncated dims at layer {idx}"))
            })?;
            *d = u32::from_le_bytes(b) as usize;
        }
        let meta = PackMeta {
            precision,
            n_max,
            dims,
        };
        let img = crate::encode::WeightBufferImage {
            sign_words: read_words(input, meta.sign_word_count(), "sign")?,
            bitmap_words: read_words(input, meta.bitmap_word_count(), "bitmap")?,
            position_words: read_words(input, meta.position_word_count(), "position")?,
        };
        layers.push(unpack_layer(&img, &meta)?);
    }
    Ok(layers)
}

/// Writes a file atomically: temp file in the same directory, then rename.
pub fn atomic_write(path: &Path, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name()
            .map(|s| s.to_string_lossy())
            .unwrap_or_default()
    ));
    std::fs::write(&tmp, &buf)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
