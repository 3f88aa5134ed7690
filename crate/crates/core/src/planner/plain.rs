use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::layers::{avgpool_plain, conv2d_plain, fc_plain, ConvSpec, FcSpec, PoolSpec, Tensor};
use crate::lif::{lif_plain_step, LifConfig, LifMode};
use crate::network::{residual_specs, Layer, LayerWeights, NetworkSpec, NetworkWeights};

/// Plaintext activations of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    /// Per timestep: the value entering the layer's last LIF stage, or the
    /// layer output when it has none.
    pub currents: Vec<Tensor>,
    /// Per timestep spikes of the last LIF stage.
    pub spikes: Option<Vec<Tensor>>,
    /// Largest `|U|` seen by any LIF stage of the layer.
    pub membrane_peak: f64,
}

/// Output of the plaintext runner.
#[derive(Debug, Clone, PartialEq)]
pub struct PlainRun {
    /// Network output summed over timesteps.
    pub scores: Vec<f64>,
    pub layers: Vec<LayerTrace>,
}

struct PlainLif {
    cfg: LifConfig,
    v: Vec<f64>,
    peak: f64,
}

impl PlainLif {
    fn new(cfg: LifConfig) -> Self {
        PlainLif { cfg, v: Vec::new(), peak: 0.0 }
    }

    fn step(&mut self, x: &Tensor, t: usize) -> Tensor {
        for (k, i) in x.data.iter().enumerate() {
            let u = if t == 1 { *i } else { self.cfg.tau * self.v[k] + i };
            self.peak = self.peak.max(u.abs());
        }
        let (s, v) = lif_plain_step(&self.v, &x.data, t, &self.cfg);
        self.v = v;
        Tensor { data: s, ..x.clone() }
    }
}

fn add(a: &Tensor, b: &Tensor) -> Tensor {
    Tensor {
        data: a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect(),
        ..a.clone()
    }
}

/// Exact floating-point forward pass, evaluated layer by layer across timesteps.
pub fn run_inference_plain(net: &NetworkSpec, weights: &NetworkWeights, frames: &[Tensor]) -> Result<PlainRun> {
    net.validate()?;
    weights.check(net)?;
    if frames.len() != net.timesteps {
        return Err(Error::Validation(alloc::format!(
            "{} input frames for {} timesteps",
            frames.len(),
            net.timesteps
        )));
    }
    if let Some(f) = frames.iter().find(|f| (f.c, f.h, f.w) != (net.input.c, net.input.h, net.input.w)) {
        return Err(Error::Validation(alloc::format!(
            "frame {}x{}x{} does not match network input {:?}",
            f.c,
            f.h,
            f.w,
            net.input
        )));
    }
    let mut acts: Vec<Tensor> = frames.to_vec();
    let mut traces = Vec::with_capacity(net.layers.len());
    for (i, (layer, w)) in net.layers.iter().zip(&weights.layers).enumerate() {
        let cfg = layer.lif().map(|p| p.config(LifMode::Switch));
        let mut lifs: Vec<PlainLif> = match layer {
            Layer::ResidualBlock { .. } => (0..2).map(|_| PlainLif::new(cfg.unwrap())).collect(),
            _ => cfg.into_iter().map(PlainLif::new).collect(),
        };
        let mut currents = Vec::with_capacity(acts.len());
        let mut spikes = Vec::with_capacity(acts.len());
        for (k, x) in acts.iter_mut().enumerate() {
            let t = k + 1;
            let current = match (layer, w) {
                (&Layer::Conv { in_ch, out_ch, kernel, stride, padding, .. }, LayerWeights::Conv(cw)) => {
                    conv2d_plain(x, &ConvSpec { c_in: in_ch, c_out: out_ch, kernel, stride, padding }, cw)?
                }
                (&Layer::Avgpool { kernel, stride, .. }, _) => avgpool_plain(x, &PoolSpec { kernel, stride })?,
                (&Layer::Fc { in_ch, out_ch, .. }, LayerWeights::Fc(fw)) => {
                    fc_plain(x, &FcSpec { n_in: in_ch, n_out: out_ch }, fw)?
                }
                (Layer::Lif { .. }, _) => x.clone(),
                (&Layer::ResidualBlock { in_ch, out_ch, kernel, stride, padding, .. }, LayerWeights::Residual { first, second, shortcut }) => {
                    let r = residual_specs(in_ch, out_ch, kernel, stride, padding);
                    let m = conv2d_plain(x, &r.first, first)?;
                    let s = lifs[0].step(&m, t);
                    let y = conv2d_plain(&s, &r.second, second)?;
                    let sc = match (r.shortcut, shortcut) {
                        (Some(spec), Some(sw)) => conv2d_plain(x, &spec, sw)?,
                        _ => x.clone(),
                    };
                    add(&y, &sc)
                }
                _ => return Err(Error::Validation(alloc::format!("layer {i}: weights of the wrong kind"))),
            };
            *x = match lifs.last_mut() {
                Some(l) => {
                    let s = l.step(&current, t);
                    spikes.push(s.clone());
                    s
                }
                None => current.clone(),
            };
            currents.push(current);
        }
        traces.push(LayerTrace {
            currents,
            spikes: (!lifs.is_empty()).then_some(spikes),
            membrane_peak: lifs.iter().map(|l| l.peak).fold(0.0, f64::max),
        });
    }
    let n = acts.first().map_or(0, |a| a.data.len());
    let mut scores = alloc::vec![0.0; n];
    for a in &acts {
        for (s, v) in scores.iter_mut().zip(&a.data) {
            *s += v;
        }
    }
    Ok(PlainRun { scores, layers: traces })
}
