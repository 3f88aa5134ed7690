//! Two-stage rotation engine for convolution and average pooling.
//!
//! Moving input slot `src` of ciphertext `u` to output slot `dst` of
//! ciphertext `m` needs a left rotation by `src - dst`, split as `a + b`:
//! the input is rotated by `a`, multiplied by a plaintext carrying the weight
//! at slot `dst + b`, summed into an accumulator keyed by `(m, b)`, and each
//! accumulator is finally rotated by `b`. `a` covers window taps and input
//! frame offsets; `b` covers the spatial compaction (row pitch change, stride)
//! and the output frame offset. Both depend on disjoint index sets, so the
//! rotation sets are computed without weights.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use super::{ConvSpec, ConvWeights, LayerStats, Layout, PackedTensor, PoolSpec};
use crate::backend::{require_level, Cv, HeBackend};
use crate::ckks::normalize_rotation;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct Part {
    m: usize,
    b: i64,
    plain: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
struct Group {
    u: usize,
    a: i64,
    parts: Vec<Part>,
}

/// A sparse slot-moving linear map between packed layouts.
#[derive(Debug, Clone)]
pub struct LinearTransform {
    input: Layout,
    output: Layout,
    groups: Vec<Group>,
    bias: Vec<Vec<f64>>,
}

struct Geometry {
    input: Layout,
    output: Layout,
    stride: usize,
    /// Input frame padding not consumed by the layer's own padding.
    offset: usize,
    /// Output frame offsets are carried by `a` (pooling keeps channels in place).
    frame_in_a: bool,
}

impl Geometry {
    fn slots(&self) -> usize {
        self.input.slots
    }

    /// Compaction shift for output element `(oi, oj)` of channel `co`.
    fn b(&self, co: usize, oi: usize, oj: usize) -> i64 {
        let wp = self.input.frame_width();
        let src = (oi * self.stride + self.offset) * wp + oj * self.stride + self.offset;
        let mut dst = self.output.pos(co, oi as isize, oj as isize);
        if self.frame_in_a {
            dst -= self.output.frame_of(co) * self.output.block();
        }
        normalize_rotation(src as i64 - dst as i64, self.slots())
    }
}

fn conv_geometry(input: &Layout, spec: &ConvSpec, out_pad: usize) -> Result<Geometry> {
    if input.channels != spec.c_in {
        return Err(Error::Validation(alloc::format!(
            "convolution expects {} input channels, layout has {}",
            spec.c_in,
            input.channels
        )));
    }
    if input.pad < spec.padding {
        return Err(Error::PlannerContract(alloc::format!(
            "input frame padding {} below convolution padding {}",
            input.pad,
            spec.padding
        )));
    }
    let (ho, wo) = spec.output_hw(input.height, input.width)?;
    Ok(Geometry {
        input: *input,
        output: Layout::new(spec.c_out, ho, wo, out_pad, input.slots)?,
        stride: spec.stride,
        offset: input.pad - spec.padding,
        frame_in_a: false,
    })
}

fn pool_geometry(input: &Layout, spec: &PoolSpec, out_pad: usize) -> Result<Geometry> {
    let (ho, wo) = spec.output_hw(input.height, input.width)?;
    Ok(Geometry {
        input: *input,
        output: Layout::new(input.channels, ho, wo, out_pad, input.slots)?,
        stride: spec.stride,
        offset: input.pad,
        frame_in_a: true,
    })
}

fn conv_a(g: &Geometry, ci: usize, di: usize, dj: usize) -> i64 {
    let v = g.input.frame_of(ci) * g.input.block() + di * g.input.frame_width() + dj;
    normalize_rotation(v as i64, g.slots())
}

fn pool_a(g: &Geometry, c: usize, di: usize, dj: usize) -> i64 {
    let v = (g.input.frame_of(c) * g.input.block() + di * g.input.frame_width() + dj) as i64
        - (g.output.frame_of(c) * g.output.block()) as i64;
    normalize_rotation(v, g.slots())
}

/// Nonzero rotation amounts of the input and output stages.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RotationSets {
    pub input: BTreeSet<i64>,
    pub output: BTreeSet<i64>,
}

impl RotationSets {
    pub fn all(&self) -> BTreeSet<i64> {
        self.input.union(&self.output).copied().collect()
    }
}

fn nonzero(it: impl Iterator<Item = i64>) -> BTreeSet<i64> {
    it.filter(|&r| r != 0).collect()
}

/// Rotation sets of a convolution, from shapes alone.
pub fn conv_rotations(input: &Layout, spec: &ConvSpec, out_pad: usize) -> Result<(RotationSets, Layout)> {
    let g = conv_geometry(input, spec, out_pad)?;
    let k = spec.kernel;
    let input_set = nonzero((0..spec.c_in).flat_map(|ci| {
        let g = &g;
        (0..k * k).map(move |t| conv_a(g, ci, t / k, t % k))
    }));
    let o = g.output;
    let output_set = nonzero((0..o.channels).flat_map(|co| {
        let g = &g;
        (0..o.height * o.width).map(move |p| g.b(co, p / o.width, p % o.width))
    }));
    Ok((
        RotationSets {
            input: input_set,
            output: output_set,
        },
        o,
    ))
}

/// Rotation sets of an average pool, from shapes alone.
pub fn pool_rotations(input: &Layout, spec: &PoolSpec, out_pad: usize) -> Result<(RotationSets, Layout)> {
    let g = pool_geometry(input, spec, out_pad)?;
    let k = spec.kernel;
    let input_set = nonzero((0..input.channels).flat_map(|c| {
        let g = &g;
        (0..k * k).map(move |t| pool_a(g, c, t / k, t % k))
    }));
    let o = g.output;
    let output_set = nonzero((0..o.channels).flat_map(|c| {
        let g = &g;
        (0..o.height * o.width).map(move |p| g.b(c, p / o.width, p % o.width))
    }));
    Ok((
        RotationSets {
            input: input_set,
            output: output_set,
        },
        o,
    ))
}

type Entry = (usize, i64, usize, i64, usize, f64);

impl LinearTransform {
    fn build(g: &Geometry, entries: impl Iterator<Item = Entry>, bias: Vec<Vec<f64>>) -> Self {
        let slots = g.slots() as i64;
        let mut map: BTreeMap<(usize, i64), BTreeMap<(usize, i64), BTreeMap<usize, f64>>> = BTreeMap::new();
        for (u, a, m, b, dst, w) in entries {
            let pos = (dst as i64 + b).rem_euclid(slots) as usize;
            *map.entry((u, a)).or_default().entry((m, b)).or_default().entry(pos).or_insert(0.0) += w;
        }
        let groups = map
            .into_iter()
            .map(|((u, a), parts)| Group {
                u,
                a,
                parts: parts
                    .into_iter()
                    .map(|((m, b), plain)| Part {
                        m,
                        b,
                        plain: plain.into_iter().collect(),
                    })
                    .collect(),
            })
            .collect();
        LinearTransform {
            input: g.input,
            output: g.output,
            groups,
            bias,
        }
    }

    /// Convolution from `input` into a frame padded by `out_pad`.
    pub fn conv(input: &Layout, spec: &ConvSpec, wts: &ConvWeights, out_pad: usize) -> Result<Self> {
        wts.check(spec)?;
        let g = conv_geometry(input, spec, out_pad)?;
        let o = g.output;
        let k = spec.kernel;
        let mut entries = Vec::new();
        for co in 0..spec.c_out {
            for oi in 0..o.height {
                for oj in 0..o.width {
                    let b = g.b(co, oi, oj);
                    let dst = o.pos(co, oi as isize, oj as isize);
                    for ci in 0..spec.c_in {
                        for di in 0..k {
                            for dj in 0..k {
                                let a = conv_a(&g, ci, di, dj);
                                let w = wts.at(spec, co, ci, di, dj);
                                entries.push((input.ct_of(ci), a, o.ct_of(co), b, dst, w));
                            }
                        }
                    }
                }
            }
        }
        let mut bias: Vec<Vec<f64>> = (0..o.n_cts).map(|m| vec![0.0; o.span(m)]).collect();
        for co in 0..spec.c_out {
            for oi in 0..o.height {
                for oj in 0..o.width {
                    bias[o.ct_of(co)][o.pos(co, oi as isize, oj as isize)] = wts.bias[co];
                }
            }
        }
        if wts.bias.iter().all(|&x| x == 0.0) {
            bias.clear();
        }
        Ok(Self::build(&g, entries.into_iter(), bias))
    }

    /// Average pool from `input` into a frame padded by `out_pad`.
    pub fn pool(input: &Layout, spec: &PoolSpec, out_pad: usize) -> Result<Self> {
        let g = pool_geometry(input, spec, out_pad)?;
        let o = g.output;
        let k = spec.kernel;
        let w = 1.0 / (k * k) as f64;
        let mut entries = Vec::new();
        for c in 0..o.channels {
            for oi in 0..o.height {
                for oj in 0..o.width {
                    let b = g.b(c, oi, oj);
                    let dst = o.pos(c, oi as isize, oj as isize);
                    for di in 0..k {
                        for dj in 0..k {
                            entries.push((input.ct_of(c), pool_a(&g, c, di, dj), o.ct_of(c), b, dst, w));
                        }
                    }
                }
            }
        }
        Ok(Self::build(&g, entries.into_iter(), Vec::new()))
    }

    pub fn input_layout(&self) -> &Layout {
        &self.input
    }
    pub fn output_layout(&self) -> &Layout {
        &self.output
    }

    /// Rotation amounts this transform executes.
    pub fn rotation_sets(&self) -> RotationSets {
        RotationSets {
            input: nonzero(self.groups.iter().map(|g| g.a)),
            output: nonzero(self.groups.iter().flat_map(|g| g.parts.iter().map(|p| p.b))),
        }
    }

    /// Operation counts of one application.
    pub fn planned_stats(&self) -> LayerStats {
        let outs: BTreeSet<(usize, i64)> = self
            .groups
            .iter()
            .flat_map(|g| g.parts.iter().map(|p| (p.m, p.b)))
            .collect();
        LayerStats {
            input_rotations: self.groups.iter().filter(|g| g.a != 0).count(),
            output_rotations: outs.iter().filter(|(_, b)| *b != 0).count(),
            plain_mults: self.groups.iter().map(|g| g.parts.len()).sum(),
        }
    }

    /// Applies the transform; consumes one level.
    pub fn apply<B: HeBackend>(&self, be: &B, xs: &[Cv<B>]) -> Result<(Vec<Cv<B>>, LayerStats)> {
        if xs.len() != self.input.n_cts {
            return Err(Error::Structural(alloc::format!(
                "{} ciphertexts for a layout of {}",
                xs.len(),
                self.input.n_cts
            )));
        }
        let level = xs.iter().map(|c| c.level()).min().unwrap_or(0);
        require_level("linear_layer", level, 1)?;
        let xs = xs.iter().map(|c| be.level_down(c, level)).collect::<Result<Vec<_>>>()?;
        let mut stats = LayerStats::default();
        let mut acc: BTreeMap<(usize, i64), B::Acc> = BTreeMap::new();
        for g in &self.groups {
            let xr = be.rotate(&xs[g.u], g.a)?;
            if g.a != 0 {
                stats.input_rotations += 1;
            }
            for p in &g.parts {
                let len = p.plain.last().map_or(0, |e| e.0 + 1);
                let mut v = vec![0.0; len];
                for &(pos, w) in &p.plain {
                    v[pos] = w;
                }
                let prev = acc.remove(&(p.m, p.b));
                acc.insert((p.m, p.b), be.mul_acc(prev, &xr, &v)?);
                stats.plain_mults += 1;
            }
        }
        let mut outs: Vec<Option<Cv<B>>> = vec![None; self.output.n_cts];
        for ((m, b), sum) in acc {
            let r = be.rotate(&be.finish_acc(sum)?, b)?;
            if b != 0 {
                stats.output_rotations += 1;
            }
            outs[m] = Some(match outs[m].take() {
                None => r,
                Some(s) => be.add(&s, &r)?,
            });
        }
        let tag = xs[0].tag();
        let mut result = Vec::with_capacity(outs.len());
        for (m, o) in outs.into_iter().enumerate() {
            let mut o = o.unwrap_or_else(|| be.zero(level - 1).with_tag(tag));
            if let Some(bias) = self.bias.get(m) {
                o = be.add_values(&o, bias)?;
            }
            result.push(o);
        }
        Ok((result, stats))
    }
}

/// Encrypted convolution; the output frame is padded by `out_pad`.
pub fn conv2d_enc<B: HeBackend>(
    be: &B,
    x: &PackedTensor<B>,
    spec: &ConvSpec,
    wts: &ConvWeights,
    out_pad: usize,
) -> Result<(PackedTensor<B>, LayerStats)> {
    let t = LinearTransform::conv(&x.layout, spec, wts, out_pad)?;
    let (cts, stats) = t.apply(be, &x.cts)?;
    Ok((PackedTensor { cts, layout: t.output }, stats))
}

/// Encrypted average pool; the output frame is padded by `out_pad`.
pub fn avgpool_enc<B: HeBackend>(
    be: &B,
    x: &PackedTensor<B>,
    spec: &PoolSpec,
    out_pad: usize,
) -> Result<(PackedTensor<B>, LayerStats)> {
    let t = LinearTransform::pool(&x.layout, spec, out_pad)?;
    let (cts, stats) = t.apply(be, &x.cts)?;
    Ok((PackedTensor { cts, layout: t.output }, stats))
}
