//! IDX files as distributed with MNIST: a big-endian `u32` magic
//! (`0x0000_0803` for images, `0x0000_0801` for labels), one big-endian
//! `u32` per dimension, then unsigned bytes.

use snnhe_core::layers::Tensor;
use snnhe_core::Result;

use super::Sample;
use crate::error::format_err;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn header<'a>(bytes: &'a [u8], magic: u32, what: &str) -> Result<(Vec<usize>, &'a [u8])> {
    let word = |i: usize| -> Result<u32> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| format_err(format!("IDX {what} header truncated")))
    };
    let m = word(0)?;
    if m != magic {
        return Err(format_err(format!("bad IDX {what} magic {m:#010x}, expected {magic:#010x}")));
    }
    let ndim = (magic & 0xff) as usize;
    let dims = (1..=ndim).map(|i| word(i).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let body = &bytes[4 * (ndim + 1)..];
    let want = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
    if want != Some(body.len()) {
        return Err(format_err(format!(
            "IDX {what} body has {} bytes, header {dims:?} declares {}",
            body.len(),
            want.map_or_else(|| "an overflowing count".into(), |w| w.to_string())
        )));
    }
    Ok((dims, body))
}

/// Images as `1×rows×cols` tensors with pixels scaled to `[0, 1]`.
pub fn parse_images(bytes: &[u8]) -> Result<Vec<Tensor>> {
    let (dims, body) = header(bytes, IMAGES_MAGIC, "images")?;
    let (rows, cols) = (dims[1], dims[2]);
    if rows == 0 || cols == 0 {
        return Err(format_err(format!("IDX images with empty {rows}x{cols} frames")));
    }
    body.chunks_exact(rows * cols)
        .take(dims[0])
        .map(|px| Tensor::from_vec(1, rows, cols, px.iter().map(|&p| f64::from(p) / 255.0).collect()))
        .collect()
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    Ok(header(bytes, LABELS_MAGIC, "labels")?.1.to_vec())
}

/// Pairs images with optional labels and replicates each image over `timesteps`.
pub fn samples(images: Vec<Tensor>, labels: Option<Vec<u8>>, timesteps: usize) -> Result<Vec<Sample>> {
    if let Some(l) = &labels {
        if l.len() != images.len() {
            return Err(format_err(format!("{} labels for {} images", l.len(), images.len())));
        }
    }
    Ok(images
        .into_iter()
        .enumerate()
        .map(|(i, img)| Sample {
            frames: vec![img; timesteps],
            label: labels.as_ref().map(|l| usize::from(l[i])),
        })
        .collect())
}

pub fn write_images(images: &[Vec<u8>], rows: usize, cols: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for w in [IMAGES_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&w.to_be_bytes());
    }
    for img in images {
        out.extend_from_slice(img);
    }
    out
}

pub fn write_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Quantizes `[0, 1]` pixels to bytes.
pub fn quantize(t: &Tensor) -> Vec<u8> {
    t.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
}
