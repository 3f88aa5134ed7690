//! Vector-encoded linear layers and their plaintext oracles.

mod fc;
mod layout;
mod linear;

use alloc::vec;
use alloc::vec::Vec;

pub use fc::{fc_enc, fc_rotations, FcLayer};
pub use layout::Layout;
pub use linear::{avgpool_enc, conv2d_enc, conv_rotations, pool_rotations, LinearTransform, RotationSets};

use crate::backend::{Cv, HeBackend};
use crate::error::{Error, Result};

/// Dense `c × h × w` tensor, row-major per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(c: usize, h: usize, w: usize) -> Tensor {
        Tensor {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Tensor> {
        if data.len() != c * h * w {
            return Err(Error::Validation(alloc::format!(
                "{} values for a {c}x{h}x{w} tensor",
                data.len()
            )));
        }
        Ok(Tensor { c, h, w, data })
    }

    /// `n` values as an `n × 1 × 1` tensor.
    pub fn vector(data: Vec<f64>) -> Tensor {
        Tensor {
            c: data.len(),
            h: 1,
            w: 1,
            data,
        }
    }

    pub fn get(&self, c: usize, i: usize, j: usize) -> f64 {
        self.data[(c * self.h + i) * self.w + j]
    }

    pub fn get_mut(&mut self, c: usize, i: usize, j: usize) -> &mut f64 {
        &mut self.data[(c * self.h + i) * self.w + j]
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.c, self.h, self.w)
    }
}

/// Encrypted tensor: ciphertexts plus their [`Layout`].
#[derive(Debug)]
pub struct PackedTensor<B: HeBackend> {
    pub cts: Vec<Cv<B>>,
    pub layout: Layout,
}

impl<B: HeBackend> Clone for PackedTensor<B> {
    fn clone(&self) -> Self {
        PackedTensor {
            cts: self.cts.clone(),
            layout: self.layout,
        }
    }
}

impl<B: HeBackend> PackedTensor<B> {
    pub fn encrypt(b: &B, t: &Tensor, layout: Layout, level: usize) -> Result<Self> {
        let cts = layout
            .pack(t)?
            .iter()
            .map(|v| b.encrypt(v, level))
            .collect::<Result<_>>()?;
        Ok(PackedTensor { cts, layout })
    }

    pub fn decrypt(&self, b: &B) -> Result<Tensor> {
        let vals = self.cts.iter().map(|c| b.decrypt(c)).collect::<Result<Vec<_>>>()?;
        self.layout.unpack(&vals)
    }

    pub fn level(&self) -> usize {
        self.cts.iter().map(|c| c.level()).min().unwrap_or(0)
    }

    pub fn byte_size(&self, b: &B) -> usize {
        self.cts.iter().map(|c| b.byte_size(c)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.c_in == 0 || self.c_out == 0 || self.kernel == 0 || self.stride == 0 {
            return Err(Error::Validation(alloc::format!("degenerate convolution {self:?}")));
        }
        Ok(())
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        self.validate()?;
        let (hp, wp) = (h + 2 * self.padding, w + 2 * self.padding);
        if hp < self.kernel || wp < self.kernel {
            return Err(Error::Validation(alloc::format!(
                "{}x{} kernel larger than padded {hp}x{wp} input",
                self.kernel,
                self.kernel
            )));
        }
        Ok(((hp - self.kernel) / self.stride + 1, (wp - self.kernel) / self.stride + 1))
    }
}

/// Kernel `K[c_out][c_in][k][k]` (row-major) and `bias[c_out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    pub kernel: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvWeights {
    pub fn check(&self, spec: &ConvSpec) -> Result<()> {
        let want = spec.c_out * spec.c_in * spec.kernel * spec.kernel;
        if self.kernel.len() != want || self.bias.len() != spec.c_out {
            return Err(Error::Validation(alloc::format!(
                "convolution weights {}+{} values, expected {want}+{}",
                self.kernel.len(),
                self.bias.len(),
                spec.c_out
            )));
        }
        Ok(())
    }

    pub fn at(&self, spec: &ConvSpec, co: usize, ci: usize, di: usize, dj: usize) -> f64 {
        self.kernel[((co * spec.c_in + ci) * spec.kernel + di) * spec.kernel + dj]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolSpec {
    pub kernel: usize,
    pub stride: usize,
}

impl PoolSpec {
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        if self.kernel == 0 || self.stride == 0 || h < self.kernel || w < self.kernel {
            return Err(Error::Validation(alloc::format!(
                "pool {}x{} stride {} does not fit {h}x{w}",
                self.kernel,
                self.kernel,
                self.stride
            )));
        }
        Ok(((h - self.kernel) / self.stride + 1, (w - self.kernel) / self.stride + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FcSpec {
    pub n_in: usize,
    pub n_out: usize,
}

/// `W[n_out][n_in]` (row-major) and `bias[n_out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FcWeights {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl FcWeights {
    pub fn check(&self, spec: &FcSpec) -> Result<()> {
        if spec.n_in == 0 || spec.n_out == 0 {
            return Err(Error::Validation(alloc::format!("degenerate fully connected layer {spec:?}")));
        }
        if self.weight.len() != spec.n_in * spec.n_out || self.bias.len() != spec.n_out {
            return Err(Error::Validation(alloc::format!(
                "fully connected weights {}+{} values, expected {}+{}",
                self.weight.len(),
                self.bias.len(),
                spec.n_in * spec.n_out,
                spec.n_out
            )));
        }
        Ok(())
    }
}

/// Rotations and plaintext products performed by one layer application.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LayerStats {
    /// Rotations of input ciphertexts (window offsets and channel moves).
    pub input_rotations: usize,
    /// Rotations of accumulated products (compaction, summation, placement).
    pub output_rotations: usize,
    pub plain_mults: usize,
}

impl LayerStats {
    pub fn rotations(&self) -> usize {
        self.input_rotations + self.output_rotations
    }
}

impl core::ops::AddAssign for LayerStats {
    fn add_assign(&mut self, o: LayerStats) {
        self.input_rotations += o.input_rotations;
        self.output_rotations += o.output_rotations;
        self.plain_mults += o.plain_mults;
    }
}

/// Cross-correlation with zero padding, as used by convolutional layers.
pub fn conv2d_plain(x: &Tensor, spec: &ConvSpec, wts: &ConvWeights) -> Result<Tensor> {
    wts.check(spec)?;
    if x.c != spec.c_in {
        return Err(Error::Validation(alloc::format!(
            "convolution expects {} input channels, got {}",
            spec.c_in,
            x.c
        )));
    }
    let (ho, wo) = spec.output_hw(x.h, x.w)?;
    let mut y = Tensor::zeros(spec.c_out, ho, wo);
    let p = spec.padding as isize;
    for co in 0..spec.c_out {
        for oi in 0..ho {
            for oj in 0..wo {
                let mut acc = wts.bias[co];
                for ci in 0..spec.c_in {
                    for di in 0..spec.kernel {
                        for dj in 0..spec.kernel {
                            let i = (oi * spec.stride + di) as isize - p;
                            let j = (oj * spec.stride + dj) as isize - p;
                            if i >= 0 && j >= 0 && (i as usize) < x.h && (j as usize) < x.w {
                                acc += wts.at(spec, co, ci, di, dj) * x.get(ci, i as usize, j as usize);
                            }
                        }
                    }
                }
                *y.get_mut(co, oi, oj) = acc;
            }
        }
    }
    Ok(y)
}

/// Mean over each `k × k` window.
pub fn avgpool_plain(x: &Tensor, spec: &PoolSpec) -> Result<Tensor> {
    let (ho, wo) = spec.output_hw(x.h, x.w)?;
    let mut y = Tensor::zeros(x.c, ho, wo);
    let inv = 1.0 / (spec.kernel * spec.kernel) as f64;
    for c in 0..x.c {
        for oi in 0..ho {
            for oj in 0..wo {
                let mut s = 0.0;
                for di in 0..spec.kernel {
                    for dj in 0..spec.kernel {
                        s += x.get(c, oi * spec.stride + di, oj * spec.stride + dj);
                    }
                }
                *y.get_mut(c, oi, oj) = s * inv;
            }
        }
    }
    Ok(y)
}

/// `y = W·flatten(x) + b`.
pub fn fc_plain(x: &Tensor, spec: &FcSpec, wts: &FcWeights) -> Result<Tensor> {
    wts.check(spec)?;
    if x.data.len() != spec.n_in {
        return Err(Error::Validation(alloc::format!(
            "fully connected layer expects {} inputs, got {}",
            spec.n_in,
            x.data.len()
        )));
    }
    let y = (0..spec.n_out)
        .map(|k| {
            let row = &wts.weight[k * spec.n_in..(k + 1) * spec.n_in];
            wts.bias[k] + row.iter().zip(&x.data).map(|(w, v)| w * v).sum::<f64>()
        })
        .collect();
    Ok(Tensor::vector(y))
}
