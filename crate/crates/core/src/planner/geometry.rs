use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::layers::{conv_rotations, fc_rotations, pool_rotations, FcSpec, Layout, PoolSpec, RotationSets};
use crate::network::{residual_specs, Layer, NetworkSpec};

/// Ciphertext layouts around one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGeometry {
    pub input: Layout,
    pub output: Layout,
    /// Residual blocks: layout between the two convolutions.
    pub mid: Option<Layout>,
    /// Every rotation the layer executes.
    pub rotations: BTreeSet<i64>,
}

/// Layouts of a whole network at a fixed slot count.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGeometry {
    pub input: Layout,
    pub layers: Vec<LayerGeometry>,
}

impl NetworkGeometry {
    pub fn output(&self) -> &Layout {
        self.layers.last().map_or(&self.input, |l| &l.output)
    }
}

/// Padding the first non-LIF layer from `from` on needs around its input.
fn consumer_pad(layers: &[Layer], from: usize) -> usize {
    layers[from..]
        .iter()
        .find(|l| !matches!(l, Layer::Lif { .. }))
        .map_or(0, Layer::input_pad)
}

fn union(sets: &[&RotationSets]) -> BTreeSet<i64> {
    sets.iter().flat_map(|s| s.all()).collect()
}

/// Chooses frame paddings so every producer writes the frame its consumer reads.
pub fn plan_layouts(net: &NetworkSpec, slots: usize) -> Result<NetworkGeometry> {
    net.validate()?;
    let s = net.input;
    let input = Layout::new(s.c, s.h, s.w, consumer_pad(&net.layers, 0), slots)
        .map_err(|e| e.context("network input"))?;
    let mut layers = Vec::with_capacity(net.layers.len());
    let mut cur = input;
    for (i, layer) in net.layers.iter().enumerate() {
        let out_pad = consumer_pad(&net.layers, i + 1);
        let g = layer_geometry(layer, &cur, out_pad).map_err(|e| e.context(alloc::format!("layer {i} ({})", layer.kind())))?;
        cur = g.output;
        layers.push(g);
    }
    Ok(NetworkGeometry { input, layers })
}

fn layer_geometry(layer: &Layer, input: &Layout, out_pad: usize) -> Result<LayerGeometry> {
    let g = |output: Layout, mid: Option<Layout>, rotations| LayerGeometry {
        input: *input,
        output,
        mid,
        rotations,
    };
    Ok(match *layer {
        Layer::Conv { in_ch, out_ch, kernel, stride, padding, .. } => {
            let spec = crate::layers::ConvSpec { c_in: in_ch, c_out: out_ch, kernel, stride, padding };
            let (r, out) = conv_rotations(input, &spec, out_pad)?;
            g(out, None, union(&[&r]))
        }
        Layer::Avgpool { kernel, stride, .. } => {
            let (r, out) = pool_rotations(input, &PoolSpec { kernel, stride }, out_pad)?;
            g(out, None, union(&[&r]))
        }
        Layer::Fc { in_ch, out_ch, .. } => {
            let (r, out) = fc_rotations(input, &FcSpec { n_in: in_ch, n_out: out_ch })?;
            g(out, None, union(&[&r]))
        }
        Layer::Lif { .. } => g(*input, None, BTreeSet::new()),
        Layer::ResidualBlock { in_ch, out_ch, kernel, stride, padding, .. } => {
            let specs = residual_specs(in_ch, out_ch, kernel, stride, padding);
            // identity shortcuts add the block input as is, so the output keeps its frame
            let out_pad = if specs.shortcut.is_none() { input.pad } else { out_pad };
            let (r1, mid) = conv_rotations(input, &specs.first, padding)?;
            let (r2, out) = conv_rotations(&mid, &specs.second, out_pad)?;
            let r3 = match specs.shortcut {
                Some(sc) => {
                    let (r3, out_sc) = conv_rotations(input, &sc, out_pad)?;
                    debug_assert_eq!(out_sc, out);
                    r3
                }
                None => {
                    if out != *input {
                        return Err(Error::PlannerContract(alloc::format!(
                            "identity shortcut layout {input:?} differs from block output {out:?}"
                        )));
                    }
                    RotationSets::default()
                }
            };
            g(out, Some(mid), union(&[&r1, &r2, &r3]))
        }
    })
}
