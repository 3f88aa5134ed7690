use alloc::vec;
use alloc::vec::Vec;

use super::Tensor;
use crate::error::{Error, Result};

/// Placement of a `channels × height × width` tensor in one or more ciphertexts.
///
/// Each channel occupies a zero-padded frame of `(height + 2·pad)·(width + 2·pad)`
/// slots stored row-major. Channel `c` lives in ciphertext `c mod n_cts` at
/// frame index `c / n_cts`; frames are contiguous from slot 0. Padding and
/// unused slots hold zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub pad: usize,
    pub n_cts: usize,
    pub slots: usize,
}

impl Layout {
    /// Fewest ciphertexts that hold the padded tensor.
    pub fn new(channels: usize, height: usize, width: usize, pad: usize, slots: usize) -> Result<Layout> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Validation(alloc::format!(
                "empty tensor shape {channels}x{height}x{width}"
            )));
        }
        let block = (height + 2 * pad) * (width + 2 * pad);
        if block > slots {
            return Err(Error::Capacity(alloc::format!(
                "a {}x{} padded frame needs {block} slots, only {slots} available",
                height + 2 * pad,
                width + 2 * pad
            )));
        }
        let per_ct = slots / block;
        let n_cts = channels.div_ceil(per_ct);
        Ok(Layout {
            channels,
            height,
            width,
            pad,
            n_cts,
            slots,
        })
    }

    /// `n` scalars in slots `0..n` of one ciphertext.
    pub fn flat(n: usize, slots: usize) -> Result<Layout> {
        if n > slots {
            return Err(Error::Capacity(alloc::format!("{n} values exceed {slots} slots")));
        }
        Layout::new(n, 1, 1, 0, slots)
    }

    pub fn frame_width(&self) -> usize {
        self.width + 2 * self.pad
    }
    pub fn block(&self) -> usize {
        (self.height + 2 * self.pad) * self.frame_width()
    }
    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn ct_of(&self, c: usize) -> usize {
        c % self.n_cts
    }
    pub fn frame_of(&self, c: usize) -> usize {
        c / self.n_cts
    }
    /// Channels stored in ciphertext `ct`.
    pub fn channels_in(&self, ct: usize) -> impl Iterator<Item = usize> + '_ {
        (ct..self.channels).step_by(self.n_cts)
    }

    /// Slot of element `(i, j)` of channel `c`; `i`, `j` may reach into the padding.
    pub fn pos(&self, c: usize, i: isize, j: isize) -> usize {
        let p = self.pad as isize;
        debug_assert!(i >= -p && i < (self.height as isize) + p);
        debug_assert!(j >= -p && j < (self.width as isize) + p);
        self.frame_of(c) * self.block() + ((i + p) as usize) * self.frame_width() + (j + p) as usize
    }

    /// Ciphertext and slot of flattened feature `f = (c·h + i)·w + j`.
    pub fn feature(&self, f: usize) -> (usize, usize) {
        let hw = self.height * self.width;
        let (c, r) = (f / hw, f % hw);
        (self.ct_of(c), self.pos(c, (r / self.width) as isize, (r % self.width) as isize))
    }

    /// One past the highest occupied slot of ciphertext `ct`.
    pub fn span(&self, ct: usize) -> usize {
        self.channels_in(ct).count() * self.block()
    }

    /// 1 on slots holding tensor elements, 0 elsewhere.
    pub fn mask(&self, ct: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.span(ct)];
        for c in self.channels_in(ct) {
            for i in 0..self.height {
                for j in 0..self.width {
                    m[self.pos(c, i as isize, j as isize)] = 1.0;
                }
            }
        }
        m
    }

    pub fn pack(&self, t: &Tensor) -> Result<Vec<Vec<f64>>> {
        if (t.c, t.h, t.w) != (self.channels, self.height, self.width) {
            return Err(Error::Validation(alloc::format!(
                "tensor {}x{}x{} does not match layout {}x{}x{}",
                t.c,
                t.h,
                t.w,
                self.channels,
                self.height,
                self.width
            )));
        }
        let mut out: Vec<Vec<f64>> = (0..self.n_cts).map(|u| vec![0.0; self.span(u)]).collect();
        for c in 0..t.c {
            for i in 0..t.h {
                for j in 0..t.w {
                    out[self.ct_of(c)][self.pos(c, i as isize, j as isize)] = t.get(c, i, j);
                }
            }
        }
        Ok(out)
    }

    pub fn unpack(&self, cts: &[Vec<f64>]) -> Result<Tensor> {
        if cts.len() != self.n_cts {
            return Err(Error::Structural(alloc::format!(
                "{} ciphertexts for a layout of {}",
                cts.len(),
                self.n_cts
            )));
        }
        let mut t = Tensor::zeros(self.channels, self.height, self.width);
        for c in 0..self.channels {
            for i in 0..self.height {
                for j in 0..self.width {
                    let p = self.pos(c, i as isize, j as isize);
                    *t.get_mut(c, i, j) = cts[self.ct_of(c)].get(p).copied().unwrap_or(0.0);
                }
            }
        }
        Ok(t)
    }

    /// Same tensor shape with a different frame padding.
    pub fn with_pad(&self, pad: usize) -> Result<Layout> {
        Layout::new(self.channels, self.height, self.width, pad, self.slots)
    }
}
