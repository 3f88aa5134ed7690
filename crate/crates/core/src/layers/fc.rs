use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use super::linear::RotationSets;
use super::{FcSpec, FcWeights, LayerStats, Layout, PackedTensor};
use crate::backend::{require_level, Cv, HeBackend};
use crate::error::{Error, Result};

/// Fully connected layer evaluated neuron by neuron.
///
/// Neuron `k`: multiply every input ciphertext by its weight row scattered
/// onto the feature slots, add the products, fold the slots into slot 0 with
/// a rotate-and-add tree, keep slot 0 with a one-hot mask, then rotate it to
/// slot `k`. Outputs are `n_out` values in the leading slots. Two levels.
#[derive(Debug, Clone)]
pub struct FcLayer {
    spec: FcSpec,
    input: Layout,
    output: Layout,
    /// Per neuron, per input ciphertext: dense weight vector.
    rows: Vec<Vec<Vec<f64>>>,
    bias: Vec<f64>,
    tree: Vec<i64>,
}

fn tree_steps(span: usize) -> Vec<i64> {
    let mut steps = Vec::new();
    let mut s = 1usize;
    while s < span {
        steps.push(s as i64);
        s *= 2;
    }
    steps
}

fn check_input(input: &Layout, spec: &FcSpec) -> Result<Layout> {
    if input.len() != spec.n_in {
        return Err(Error::Validation(alloc::format!(
            "fully connected layer expects {} inputs, layout holds {}",
            spec.n_in,
            input.len()
        )));
    }
    if spec.n_out > input.slots / 2 {
        return Err(Error::Capacity(alloc::format!(
            "{} outputs exceed the rotation range of {} slots",
            spec.n_out,
            input.slots
        )));
    }
    Layout::flat(spec.n_out, input.slots)
}

/// Tree and placement rotations of a fully connected layer.
pub fn fc_rotations(input: &Layout, spec: &FcSpec) -> Result<(RotationSets, Layout)> {
    let output = check_input(input, spec)?;
    let span = (0..input.n_cts).map(|u| input.span(u)).max().unwrap_or(0);
    let mut set: BTreeSet<i64> = tree_steps(span).into_iter().collect();
    set.extend((1..spec.n_out as i64).map(|k| -k));
    Ok((
        RotationSets {
            input: BTreeSet::new(),
            output: set,
        },
        output,
    ))
}

impl FcLayer {
    pub fn new(input: &Layout, spec: &FcSpec, wts: &FcWeights) -> Result<Self> {
        wts.check(spec)?;
        let output = check_input(input, spec)?;
        let span = (0..input.n_cts).map(|u| input.span(u)).max().unwrap_or(0);
        let rows = (0..spec.n_out)
            .map(|k| {
                let mut per_ct: Vec<Vec<f64>> = (0..input.n_cts).map(|u| vec![0.0; input.span(u)]).collect();
                for f in 0..spec.n_in {
                    let (u, pos) = input.feature(f);
                    per_ct[u][pos] = wts.weight[k * spec.n_in + f];
                }
                per_ct
            })
            .collect();
        Ok(FcLayer {
            spec: *spec,
            input: *input,
            output,
            rows,
            bias: wts.bias.clone(),
            tree: tree_steps(span),
        })
    }

    pub fn output_layout(&self) -> &Layout {
        &self.output
    }

    pub fn planned_stats(&self) -> LayerStats {
        let n = self.spec.n_out;
        LayerStats {
            input_rotations: 0,
            output_rotations: n * self.tree.len() + n - 1,
            plain_mults: n * (self.input.n_cts + 1),
        }
    }

    pub fn apply<B: HeBackend>(&self, be: &B, xs: &[Cv<B>]) -> Result<(Cv<B>, LayerStats)> {
        if xs.len() != self.input.n_cts {
            return Err(Error::Structural(alloc::format!(
                "{} ciphertexts for a layout of {}",
                xs.len(),
                self.input.n_cts
            )));
        }
        let level = xs.iter().map(|c| c.level()).min().unwrap_or(0);
        require_level("fully_connected", level, 2)?;
        let xs = xs.iter().map(|c| be.level_down(c, level)).collect::<Result<Vec<_>>>()?;
        let mut stats = LayerStats::default();
        let mut out: Option<Cv<B>> = None;
        for (k, row) in self.rows.iter().enumerate() {
            let mut prod: Option<B::Acc> = None;
            for (x, w) in xs.iter().zip(row) {
                prod = Some(be.mul_acc(prod, x, w)?);
                stats.plain_mults += 1;
            }
            let mut v = be.finish_acc(prod.expect("at least one input ciphertext"))?;
            for &s in &self.tree {
                let r = be.rotate(&v, s)?;
                v = be.add(&v, &r)?;
                stats.output_rotations += 1;
            }
            let kept = be.mul_values(&v, &[1.0])?;
            stats.plain_mults += 1;
            let placed = if k == 0 {
                kept
            } else {
                stats.output_rotations += 1;
                be.rotate(&kept, -(k as i64))?
            };
            out = Some(match out {
                None => placed,
                Some(s) => be.add(&s, &placed)?,
            });
        }
        let out = be.add_values(&out.expect("n_out >= 1"), &self.bias)?;
        Ok((out, stats))
    }
}

/// Encrypted fully connected layer.
pub fn fc_enc<B: HeBackend>(
    be: &B,
    x: &PackedTensor<B>,
    spec: &FcSpec,
    wts: &FcWeights,
) -> Result<(PackedTensor<B>, LayerStats)> {
    let layer = FcLayer::new(&x.layout, spec, wts)?;
    let (ct, stats) = layer.apply(be, &x.cts)?;
    Ok((
        PackedTensor {
            cts: vec![ct],
            layout: layer.output,
        },
        stats,
    ))
}
