//! Network descriptions, shape checking and weight containers.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::layers::{ConvSpec, ConvWeights, FcSpec, FcWeights, PoolSpec};
use crate::lif::{LifConfig, LifMode, DEFAULT_TAU, DEFAULT_THRESHOLD};
use crate::approx::DEFAULT_DEGREE;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}
fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}
fn default_scale() -> f64 {
    1.0
}
fn default_degree() -> usize {
    DEFAULT_DEGREE
}
fn one() -> usize {
    1
}

/// LIF parameters as stored in a network description; the mode is chosen at run time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifParams {
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_scale")]
    pub scale_value: f64,
    #[serde(default = "default_degree")]
    pub degree: usize,
}

impl Default for LifParams {
    fn default() -> Self {
        LifParams {
            tau: DEFAULT_TAU,
            threshold: DEFAULT_THRESHOLD,
            scale_value: 1.0,
            degree: DEFAULT_DEGREE,
        }
    }
}

impl LifParams {
    pub fn config(&self, mode: LifMode) -> LifConfig {
        LifConfig {
            tau: self.tau,
            threshold: self.threshold,
            scale_value: self.scale_value,
            degree: self.degree,
            mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Layer {
    Conv {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lif: Option<LifParams>,
    },
    Avgpool {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        in_ch: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        out_ch: Option<usize>,
        kernel: usize,
        stride: usize,
    },
    Fc {
        in_ch: usize,
        out_ch: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lif: Option<LifParams>,
    },
    Lif {
        #[serde(flatten)]
        lif: LifParams,
    },
    /// `conv(k, stride) → LIF → conv(k, 1) → + shortcut → LIF`. The shortcut
    /// is the identity, or a strided 1×1 convolution when the stride or the
    /// channel count changes.
    ResidualBlock {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        padding: usize,
        #[serde(default)]
        lif: LifParams,
    },
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Conv { .. } => "conv",
            Layer::Avgpool { .. } => "avgpool",
            Layer::Fc { .. } => "fc",
            Layer::Lif { .. } => "lif",
            Layer::ResidualBlock { .. } => "residual-block",
        }
    }

    /// LIF parameters of the layer's (last) spiking stage.
    pub fn lif(&self) -> Option<&LifParams> {
        match self {
            Layer::Conv { lif, .. } | Layer::Fc { lif, .. } => lif.as_ref(),
            Layer::Lif { lif } | Layer::ResidualBlock { lif, .. } => Some(lif),
            Layer::Avgpool { .. } => None,
        }
    }

    /// Frame padding this layer needs around its input.
    pub fn input_pad(&self) -> usize {
        match self {
            Layer::Conv { padding, .. } | Layer::ResidualBlock { padding, .. } => *padding,
            _ => 0,
        }
    }
}

/// The convolutions inside a residual block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResidualSpecs {
    pub first: ConvSpec,
    pub second: ConvSpec,
    pub shortcut: Option<ConvSpec>,
}

pub fn residual_specs(in_ch: usize, out_ch: usize, kernel: usize, stride: usize, padding: usize) -> ResidualSpecs {
    ResidualSpecs {
        first: ConvSpec { c_in: in_ch, c_out: out_ch, kernel, stride, padding },
        second: ConvSpec { c_in: out_ch, c_out: out_ch, kernel, stride: 1, padding },
        shortcut: (stride != 1 || in_ch != out_ch).then_some(ConvSpec {
            c_in: in_ch,
            c_out: out_ch,
            kernel: 1,
            stride,
            padding: 0,
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub name: String,
    pub input: Shape,
    pub timesteps: usize,
    #[serde(default)]
    pub layers: Vec<Layer>,
}

fn invalid(i: usize, layer: &Layer, msg: impl core::fmt::Display) -> Error {
    Error::Validation(alloc::format!("layer {i} ({}): {msg}", layer.kind()))
}

impl NetworkSpec {
    /// Checks every layer and returns the input shape of each layer followed
    /// by the network output shape.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        if self.timesteps == 0 {
            return Err(Error::Validation("timesteps must be at least 1".into()));
        }
        if self.input.is_empty() {
            return Err(Error::Validation("empty input shape".into()));
        }
        let mut shapes = Vec::with_capacity(self.layers.len() + 1);
        let mut s = self.input;
        shapes.push(s);
        for (i, layer) in self.layers.iter().enumerate() {
            s = self.next_shape(i, layer, s)?;
            if let Some(p) = layer.lif() {
                p.config(LifMode::Approx)
                    .validate()
                    .or_else(|_| p.config(LifMode::Switch).validate())
                    .map_err(|e| invalid(i, layer, e))?;
            }
            shapes.push(s);
        }
        Ok(shapes)
    }

    fn next_shape(&self, i: usize, layer: &Layer, s: Shape) -> Result<Shape> {
        let conv = |spec: ConvSpec, s: Shape| -> Result<Shape> {
            if spec.c_in != s.c {
                return Err(invalid(i, layer, alloc::format!("expects {} input channels, previous layer gives {}", spec.c_in, s.c)));
            }
            let (h, w) = spec.output_hw(s.h, s.w).map_err(|e| invalid(i, layer, e))?;
            Ok(Shape { c: spec.c_out, h, w })
        };
        match *layer {
            Layer::Conv { in_ch, out_ch, kernel, stride, padding, .. } => {
                conv(ConvSpec { c_in: in_ch, c_out: out_ch, kernel, stride, padding }, s)
            }
            Layer::Avgpool { in_ch, out_ch, kernel, stride } => {
                for c in [in_ch, out_ch].into_iter().flatten() {
                    if c != s.c {
                        return Err(invalid(i, layer, alloc::format!("declares {c} channels, previous layer gives {}", s.c)));
                    }
                }
                let (h, w) = PoolSpec { kernel, stride }.output_hw(s.h, s.w).map_err(|e| invalid(i, layer, e))?;
                Ok(Shape { c: s.c, h, w })
            }
            Layer::Fc { in_ch, out_ch, .. } => {
                if in_ch != s.len() || out_ch == 0 {
                    return Err(invalid(i, layer, alloc::format!("{in_ch}→{out_ch} after a {}x{}x{} tensor ({} values)", s.c, s.h, s.w, s.len())));
                }
                Ok(Shape { c: out_ch, h: 1, w: 1 })
            }
            Layer::Lif { .. } => Ok(s),
            Layer::ResidualBlock { in_ch, out_ch, kernel, stride, padding, .. } => {
                let r = residual_specs(in_ch, out_ch, kernel, stride, padding);
                let mid = conv(r.first, s)?;
                let out = conv(r.second, mid)?;
                let short = match r.shortcut {
                    Some(sc) => conv(sc, s)?,
                    None => s,
                };
                if short != out {
                    return Err(invalid(i, layer, alloc::format!("shortcut gives {short:?}, main path {out:?}")));
                }
                Ok(out)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.shapes().map(|_| ())
    }

    pub fn output_shape(&self) -> Result<Shape> {
        Ok(*self.shapes()?.last().expect("input shape present"))
    }

    pub fn with_timesteps(&self, t: usize) -> NetworkSpec {
        NetworkSpec {
            timesteps: t,
            ..self.clone()
        }
    }
}

/// Parameters of one layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerWeights {
    None,
    Conv(ConvWeights),
    Fc(FcWeights),
    Residual {
        first: ConvWeights,
        second: ConvWeights,
        shortcut: Option<ConvWeights>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    pub layers: Vec<LayerWeights>,
}

impl NetworkWeights {
    pub fn check(&self, net: &NetworkSpec) -> Result<()> {
        if self.layers.len() != net.layers.len() {
            return Err(Error::Validation(alloc::format!(
                "{} weight entries for {} layers",
                self.layers.len(),
                net.layers.len()
            )));
        }
        for (i, (layer, w)) in net.layers.iter().zip(&self.layers).enumerate() {
            let bad = |e: Error| invalid(i, layer, e);
            match (layer, w) {
                (Layer::Conv { in_ch, out_ch, kernel, stride, padding, .. }, LayerWeights::Conv(cw)) => {
                    cw.check(&ConvSpec { c_in: *in_ch, c_out: *out_ch, kernel: *kernel, stride: *stride, padding: *padding })
                        .map_err(bad)?
                }
                (Layer::Fc { in_ch, out_ch, .. }, LayerWeights::Fc(fw)) => {
                    fw.check(&FcSpec { n_in: *in_ch, n_out: *out_ch }).map_err(bad)?
                }
                (Layer::ResidualBlock { in_ch, out_ch, kernel, stride, padding, .. }, LayerWeights::Residual { first, second, shortcut }) => {
                    let r = residual_specs(*in_ch, *out_ch, *kernel, *stride, *padding);
                    first.check(&r.first).map_err(bad)?;
                    second.check(&r.second).map_err(bad)?;
                    match (r.shortcut, shortcut) {
                        (Some(s), Some(w)) => w.check(&s).map_err(bad)?,
                        (None, None) => {}
                        _ => return Err(invalid(i, layer, "shortcut weights do not match the block shape")),
                    }
                }
                (Layer::Avgpool { .. } | Layer::Lif { .. }, LayerWeights::None) => {}
                _ => return Err(invalid(i, layer, "weights of the wrong kind")),
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn lenet() -> NetworkSpec {
        let lif = Some(LifParams::default());
        NetworkSpec {
            name: "lenet".into(),
            input: Shape { c: 1, h: 28, w: 28 },
            timesteps: 2,
            layers: vec![
                Layer::Conv { in_ch: 1, out_ch: 6, kernel: 5, stride: 1, padding: 0, lif },
                Layer::Avgpool { in_ch: Some(6), out_ch: Some(6), kernel: 2, stride: 2 },
                Layer::Conv { in_ch: 6, out_ch: 16, kernel: 5, stride: 1, padding: 0, lif },
                Layer::Avgpool { in_ch: None, out_ch: None, kernel: 2, stride: 2 },
                Layer::Fc { in_ch: 256, out_ch: 120, lif },
                Layer::Fc { in_ch: 120, out_ch: 84, lif },
                Layer::Fc { in_ch: 84, out_ch: 10, lif: None },
            ],
        }
    }

    #[test]
    fn lenet_shapes_compose() {
        let s = lenet().shapes().unwrap();
        assert_eq!(s[4], Shape { c: 16, h: 4, w: 4 });
        assert_eq!(*s.last().unwrap(), Shape { c: 10, h: 1, w: 1 });
        let mut n = lenet();
        n.input = Shape { c: 2, h: 36, w: 36 };
        assert!(n.validate().is_err());
        if let Layer::Conv { in_ch, .. } = &mut n.layers[0] {
            *in_ch = 2;
        }
        if let Layer::Fc { in_ch, .. } = &mut n.layers[4] {
            *in_ch = 576;
        }
        n.validate().unwrap();
    }

    #[test]
    fn mismatch_names_layer_index() {
        let mut n = lenet();
        if let Layer::Conv { in_ch, .. } = &mut n.layers[2] {
            *in_ch = 5;
        }
        let e = n.validate().unwrap_err();
        assert!(alloc::format!("{e}").contains("layer 2 (conv)"), "{e}");
    }

    #[test]
    fn empty_network_is_identity() {
        let n = NetworkSpec { name: "id".into(), input: Shape { c: 1, h: 2, w: 2 }, timesteps: 1, layers: vec![] };
        assert_eq!(n.output_shape().unwrap(), n.input);
    }

    #[test]
    fn residual_shortcut_rules() {
        assert!(residual_specs(16, 16, 3, 1, 1).shortcut.is_none());
        let r = residual_specs(16, 32, 3, 2, 1);
        assert_eq!(r.shortcut.unwrap(), ConvSpec { c_in: 16, c_out: 32, kernel: 1, stride: 2, padding: 0 });
        let n = NetworkSpec {
            name: "rb".into(),
            input: Shape { c: 16, h: 32, w: 32 },
            timesteps: 1,
            layers: vec![Layer::ResidualBlock { in_ch: 16, out_ch: 32, kernel: 3, stride: 2, padding: 1, lif: LifParams::default() }],
        };
        assert_eq!(n.output_shape().unwrap(), Shape { c: 32, h: 16, w: 16 });
    }

    #[test]
    fn weights_must_match() {
        let n = NetworkSpec {
            name: "f".into(),
            input: Shape { c: 2, h: 1, w: 1 },
            timesteps: 1,
            layers: vec![Layer::Fc { in_ch: 2, out_ch: 2, lif: None }],
        };
        let ok = NetworkWeights { layers: vec![LayerWeights::Fc(FcWeights { weight: vec![1.0, 0.0, 0.0, 1.0], bias: vec![0.0; 2] })] };
        ok.check(&n).unwrap();
        let short = NetworkWeights { layers: vec![LayerWeights::Fc(FcWeights { weight: vec![1.0; 3], bias: vec![0.0; 2] })] };
        assert!(short.check(&n).is_err());
        assert!(NetworkWeights { layers: vec![LayerWeights::None] }.check(&n).is_err());
    }
}
