use alloc::vec;
use alloc::vec::Vec;

use super::drive::{Exec, Lin};
use super::geometry::NetworkGeometry;
use crate::backend::{Cv, HeBackend};
use crate::error::{Error, Result};
use crate::layers::{ConvSpec, FcLayer, FcSpec, LayerStats, Layout, LinearTransform, PackedTensor, PoolSpec};
use crate::lif::{LifEvaluator, LifMode, Membrane};
use crate::network::{residual_specs, Layer, LayerWeights, NetworkSpec, NetworkWeights};

enum Loaded {
    Empty,
    Linear(LinearTransform),
    Fc(FcLayer),
    Residual {
        first: LinearTransform,
        second: LinearTransform,
        shortcut: Option<LinearTransform>,
    },
}

/// Executes layers on a backend. Only the current layer's weights are held.
pub(crate) struct BackendExec<'a, B: HeBackend> {
    pub b: &'a B,
    pub net: &'a NetworkSpec,
    pub weights: &'a NetworkWeights,
    pub geometry: &'a NetworkGeometry,
    pub mode: LifMode,
    loaded: Loaded,
    lif: Option<LifEvaluator>,
    thresholds: Option<Cv<B>>,
    /// Per layer.
    pub stats: Vec<LayerStats>,
}

impl<'a, B: HeBackend> BackendExec<'a, B> {
    pub fn new(b: &'a B, net: &'a NetworkSpec, weights: &'a NetworkWeights, geometry: &'a NetworkGeometry, mode: LifMode) -> Self {
        BackendExec {
            b,
            net,
            weights,
            geometry,
            mode,
            loaded: Loaded::Empty,
            lif: None,
            thresholds: None,
            stats: vec![LayerStats::default(); net.layers.len()],
        }
    }

    fn apply(&mut self, i: usize, t: &LinearTransform, x: &PackedTensor<B>) -> Result<PackedTensor<B>> {
        if x.layout != *t.input_layout() {
            return Err(Error::PlannerContract(alloc::format!(
                "activation layout {:?} does not match transform input {:?}",
                x.layout,
                t.input_layout()
            )));
        }
        let (cts, stats) = t.apply(self.b, &x.cts)?;
        self.stats[i] += stats;
        Ok(PackedTensor { cts, layout: *t.output_layout() })
    }

    fn mask(&self, layout: &Layout, ct: usize) -> Option<Vec<f64>> {
        (self.mode == LifMode::Approx).then(|| layout.mask(ct))
    }
}

impl<B: HeBackend> Exec for BackendExec<'_, B> {
    type Act = PackedTensor<B>;
    type Mem = Vec<Membrane<B>>;

    fn level(&self, x: &PackedTensor<B>) -> usize {
        x.level()
    }
    fn n_cts(&self, x: &PackedTensor<B>) -> usize {
        x.cts.len()
    }
    fn bytes(&self, x: &PackedTensor<B>) -> usize {
        x.byte_size(self.b)
    }

    fn refresh(&mut self, x: &PackedTensor<B>) -> Result<PackedTensor<B>> {
        Ok(PackedTensor {
            cts: x.cts.iter().map(|c| self.b.refresh(c)).collect::<Result<_>>()?,
            layout: x.layout,
        })
    }

    fn begin_layer(&mut self, i: usize) -> Result<()> {
        let g = &self.geometry.layers[i];
        let w = &self.weights.layers[i];
        let wrong = || Error::Validation(alloc::format!("layer {i}: weights of the wrong kind"));
        self.loaded = match (&self.net.layers[i], w) {
            (&Layer::Conv { in_ch, out_ch, kernel, stride, padding, .. }, LayerWeights::Conv(cw)) => {
                let spec = ConvSpec { c_in: in_ch, c_out: out_ch, kernel, stride, padding };
                Loaded::Linear(LinearTransform::conv(&g.input, &spec, cw, g.output.pad)?)
            }
            (&Layer::Avgpool { kernel, stride, .. }, _) => {
                Loaded::Linear(LinearTransform::pool(&g.input, &PoolSpec { kernel, stride }, g.output.pad)?)
            }
            (&Layer::Fc { in_ch, out_ch, .. }, LayerWeights::Fc(fw)) => {
                Loaded::Fc(FcLayer::new(&g.input, &FcSpec { n_in: in_ch, n_out: out_ch }, fw)?)
            }
            (Layer::Lif { .. }, _) => Loaded::Empty,
            (&Layer::ResidualBlock { in_ch, out_ch, kernel, stride, padding, .. }, LayerWeights::Residual { first, second, shortcut }) => {
                let specs = residual_specs(in_ch, out_ch, kernel, stride, padding);
                let mid = g.mid.ok_or_else(wrong)?;
                Loaded::Residual {
                    first: LinearTransform::conv(&g.input, &specs.first, first, mid.pad)?,
                    second: LinearTransform::conv(&mid, &specs.second, second, g.output.pad)?,
                    shortcut: match (specs.shortcut, shortcut) {
                        (Some(s), Some(w)) => Some(LinearTransform::conv(&g.input, &s, w, g.output.pad)?),
                        (None, None) => None,
                        _ => return Err(wrong()),
                    },
                }
            }
            _ => return Err(wrong()),
        };
        self.lif = match self.net.layers[i].lif() {
            Some(p) => Some(LifEvaluator::new(p.config(self.mode))?),
            None => None,
        };
        self.thresholds = match (&self.lif, self.mode) {
            (Some(ev), LifMode::Switch) => {
                Some(self.b.encrypt_fresh(&vec![ev.config().threshold; self.b.slots()])?)
            }
            _ => None,
        };
        Ok(())
    }

    fn end_layer(&mut self, _: usize) {
        self.loaded = Loaded::Empty;
        self.lif = None;
        self.thresholds = None;
    }

    fn linear(&mut self, i: usize, which: Lin, x: &PackedTensor<B>) -> Result<PackedTensor<B>> {
        let loaded = core::mem::replace(&mut self.loaded, Loaded::Empty);
        let out = match (&loaded, which) {
            (Loaded::Linear(t), Lin::Main) => self.apply(i, t, x),
            (Loaded::Fc(f), Lin::Main) => {
                let (ct, stats) = f.apply(self.b, &x.cts)?;
                self.stats[i] += stats;
                Ok(PackedTensor { cts: vec![ct], layout: *f.output_layout() })
            }
            (Loaded::Residual { first, .. }, Lin::Main) => self.apply(i, first, x),
            (Loaded::Residual { second, .. }, Lin::Second) => self.apply(i, second, x),
            (Loaded::Residual { shortcut: Some(s), .. }, Lin::Shortcut) => self.apply(i, s, x),
            _ => Err(Error::PlannerContract(alloc::format!("layer {i}: no {which:?} transform loaded"))),
        };
        self.loaded = loaded;
        out
    }

    fn add(&mut self, a: &PackedTensor<B>, b: &PackedTensor<B>) -> Result<PackedTensor<B>> {
        if a.layout != b.layout {
            return Err(Error::PlannerContract(alloc::format!(
                "residual join of layouts {:?} and {:?}",
                a.layout,
                b.layout
            )));
        }
        Ok(PackedTensor {
            cts: a.cts.iter().zip(&b.cts).map(|(x, y)| self.b.add(x, y)).collect::<Result<_>>()?,
            layout: a.layout,
        })
    }

    fn lif(&mut self, i: usize, _: usize, x: &PackedTensor<B>, mem: &mut Vec<Membrane<B>>) -> Result<PackedTensor<B>> {
        let ev = self
            .lif
            .as_ref()
            .ok_or_else(|| Error::PlannerContract(alloc::format!("layer {i}: no LIF loaded")))?;
        if mem.is_empty() {
            mem.resize_with(x.cts.len(), Membrane::new);
        }
        let mut spikes = Vec::with_capacity(x.cts.len());
        for (u, (ct, m)) in x.cts.iter().zip(mem.iter_mut()).enumerate() {
            let mask = self.mask(&x.layout, u);
            spikes.push(ev.step(self.b, m, ct, self.thresholds.as_ref(), mask.as_deref())?);
        }
        Ok(PackedTensor { cts: spikes, layout: x.layout })
    }

    fn mem_level(&self, mem: &Vec<Membrane<B>>) -> Option<usize> {
        mem.iter().map(|m| m.level()).min().flatten()
    }

    fn mem_bytes(&self, mem: &Vec<Membrane<B>>) -> usize {
        mem.iter().filter_map(|m| m.potential()).map(|v| self.b.byte_size(v)).sum()
    }

    fn refresh_mem(&mut self, mem: &mut Vec<Membrane<B>>) -> Result<()> {
        for m in mem.iter_mut() {
            if let Some(v) = m.potential() {
                let r = self.b.refresh(v)?;
                m.set_potential(r);
            }
        }
        Ok(())
    }
}
