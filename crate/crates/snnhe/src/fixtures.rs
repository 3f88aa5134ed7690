//! Seeded fixture generation: Gaussian weights, scale values calibrated on
//! plaintext activations, random inputs and golden plaintext traces.

use std::fs;
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use snnhe_core::layers::{ConvSpec, ConvWeights, FcWeights, Tensor};
use snnhe_core::lif::argmax;
use snnhe_core::network::{residual_specs, Layer, LayerWeights, NetworkSpec, NetworkWeights};
use snnhe_core::planner::{run_inference_plain, PlainRun};
use snnhe_core::ring::{standard_normal, unit_f64};

use crate::error::{Error, Result};
use crate::io::{self, idx, Sample};
use crate::keys::sha256_hex;

/// Weight standard deviation is `GAIN / sqrt(fan_in)`.
pub const GAIN: f64 = 2.0;
pub const BIAS_STDDEV: f64 = 0.1;
/// Scale value = `CALIBRATION_MARGIN · max |U|` over the calibration inputs.
pub const CALIBRATION_MARGIN: f64 = 1.5;
pub const CALIBRATION_SAMPLES: usize = 32;

fn gaussian(rng: &mut ChaCha20Rng, n: usize, sigma: f64) -> Vec<f64> {
    (0..n).map(|_| sigma * standard_normal(rng)).collect()
}

fn conv_weights(rng: &mut ChaCha20Rng, s: &ConvSpec) -> ConvWeights {
    let fan = s.c_in * s.kernel * s.kernel;
    ConvWeights {
        kernel: gaussian(rng, s.c_out * fan, GAIN / (fan as f64).sqrt()),
        bias: gaussian(rng, s.c_out, BIAS_STDDEV),
    }
}

pub fn gaussian_weights(net: &NetworkSpec, rng: &mut ChaCha20Rng) -> NetworkWeights {
    let layers = net
        .layers
        .iter()
        .map(|l| match *l {
            Layer::Conv { in_ch, out_ch, kernel, stride, padding, .. } => {
                LayerWeights::Conv(conv_weights(rng, &ConvSpec { c_in: in_ch, c_out: out_ch, kernel, stride, padding }))
            }
            Layer::Fc { in_ch, out_ch, .. } => LayerWeights::Fc(FcWeights {
                weight: gaussian(rng, in_ch * out_ch, GAIN / (in_ch as f64).sqrt()),
                bias: gaussian(rng, out_ch, BIAS_STDDEV),
            }),
            Layer::ResidualBlock { in_ch, out_ch, kernel, stride, padding, .. } => {
                let r = residual_specs(in_ch, out_ch, kernel, stride, padding);
                LayerWeights::Residual {
                    first: conv_weights(rng, &r.first),
                    second: conv_weights(rng, &r.second),
                    shortcut: r.shortcut.map(|s| conv_weights(rng, &s)),
                }
            }
            Layer::Avgpool { .. } | Layer::Lif { .. } => LayerWeights::None,
        })
        .collect();
    NetworkWeights { layers }
}

/// Weights with every value zero.
pub fn zero_weights(net: &NetworkSpec) -> NetworkWeights {
    let mut w = gaussian_weights(net, &mut ChaCha20Rng::seed_from_u64(0));
    let zero = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x = 0.0);
    for l in &mut w.layers {
        match l {
            LayerWeights::Conv(c) => {
                zero(&mut c.kernel);
                zero(&mut c.bias);
            }
            LayerWeights::Fc(f) => {
                zero(&mut f.weight);
                zero(&mut f.bias);
            }
            LayerWeights::Residual { first, second, shortcut } => {
                for c in [Some(first), Some(second), shortcut.as_mut()].into_iter().flatten() {
                    zero(&mut c.kernel);
                    zero(&mut c.bias);
                }
            }
            LayerWeights::None => {}
        }
    }
    w
}

/// Uniform `[0, 1]` inputs, exactly representable in both file formats.
/// Single-channel networks get one image replicated over time, like IDX
/// data; others get a distinct frame per timestep.
pub fn random_samples(net: &NetworkSpec, count: usize, rng: &mut ChaCha20Rng) -> Vec<Sample> {
    let s = net.input;
    let frame = |rng: &mut ChaCha20Rng| Tensor {
        c: s.c,
        h: s.h,
        w: s.w,
        data: (0..s.len()).map(|_| f64::from((unit_f64(rng) * 256.0).floor().min(255.0) as u8) / 255.0).collect(),
    };
    (0..count)
        .map(|_| {
            let frames = if s.c == 1 {
                vec![frame(rng); net.timesteps]
            } else {
                (0..net.timesteps).map(|_| frame(rng)).collect()
            };
            Sample { frames, label: None }
        })
        .collect()
}

/// Sets every LIF scale value to `CALIBRATION_MARGIN · max |U|` seen on
/// `samples`, but never below the value that keeps the threshold inside
/// the approximation interval.
pub fn calibrate(net: &NetworkSpec, weights: &NetworkWeights, samples: &[Sample]) -> Result<NetworkSpec> {
    let mut peaks = vec![0.0f64; net.layers.len()];
    for s in samples {
        let run = run_inference_plain(net, weights, &s.frames)?;
        for (p, l) in peaks.iter_mut().zip(&run.layers) {
            *p = p.max(l.membrane_peak);
        }
    }
    let mut out = net.clone();
    for (layer, peak) in out.layers.iter_mut().zip(peaks) {
        let params = match layer {
            Layer::Conv { lif: Some(p), .. } | Layer::Fc { lif: Some(p), .. } => p,
            Layer::Lif { lif } | Layer::ResidualBlock { lif, .. } => lif,
            _ => continue,
        };
        let value = (CALIBRATION_MARGIN * peak).max(2.0 * params.threshold.abs()).max(1.0);
        params.scale_value = (value * 1e3).ceil() / 1e3;
    }
    out.validate()?;
    Ok(out)
}

/// Labels each sample with the plaintext network's prediction.
pub fn label_by_plaintext(net: &NetworkSpec, weights: &NetworkWeights, samples: &mut [Sample]) -> Result<()> {
    let classes = net.output_shape()?.len();
    for s in samples {
        let run = run_inference_plain(net, weights, &s.frames)?;
        s.label = argmax(&run.scores, classes);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerGolden {
    pub kind: String,
    /// Per timestep, the value entering the layer's last LIF stage (or its output).
    pub currents: Vec<Vec<f64>>,
    pub spikes: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGolden {
    pub scores: Vec<f64>,
    pub prediction: Option<usize>,
    pub layers: Vec<LayerGolden>,
}

/// Plaintext activations and spikes of a fixture network on its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenTrace {
    pub network: String,
    pub seed: u64,
    pub samples: Vec<SampleGolden>,
}

fn sample_golden(net: &NetworkSpec, run: PlainRun) -> Result<SampleGolden> {
    let classes = net.output_shape()?.len();
    Ok(SampleGolden {
        prediction: argmax(&run.scores, classes),
        scores: run.scores,
        layers: net
            .layers
            .iter()
            .zip(run.layers)
            .map(|(l, t)| LayerGolden {
                kind: l.kind().into(),
                currents: t.currents.into_iter().map(|c| c.data).collect(),
                spikes: t.spikes.map(|s| s.into_iter().map(|x| x.data).collect()),
            })
            .collect(),
    })
}

pub fn golden_trace(net: &NetworkSpec, weights: &NetworkWeights, samples: &[Sample], seed: u64) -> Result<GoldenTrace> {
    Ok(GoldenTrace {
        network: net.name.clone(),
        seed,
        samples: samples
            .iter()
            .map(|s| sample_golden(net, run_inference_plain(net, weights, &s.frames)?))
            .collect::<Result<_>>()?,
    })
}

/// A generated network with weights and inputs, before it is written out.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub net: NetworkSpec,
    pub weights: NetworkWeights,
    pub samples: Vec<Sample>,
}

/// Deterministic fixture for `net`: Gaussian weights, calibrated scale
/// values and `count` labelled random inputs.
pub fn build(net: &NetworkSpec, seed: u64, count: usize) -> Result<Fixture> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let weights = gaussian_weights(net, &mut rng);
    let calibration = random_samples(net, CALIBRATION_SAMPLES, &mut rng);
    let net = calibrate(net, &weights, &calibration)?;
    let mut samples = random_samples(&net, count, &mut rng);
    label_by_plaintext(&net, &weights, &mut samples)?;
    Ok(Fixture { net, weights, samples })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FixtureSummary {
    pub files: Vec<(String, String)>,
    /// SHA-256 over the sorted `name:digest` lines of every file.
    pub digest: String,
}

pub const NETWORK_FILE: &str = "network.json";
pub const WEIGHTS_DIR: &str = "weights";
pub const GOLDEN_FILE: &str = "golden.json";

/// Name of the inputs file: IDX for single-channel static inputs, SPKF otherwise.
pub fn inputs_file(net: &NetworkSpec) -> &'static str {
    if net.input.c == 1 {
        "inputs-images-idx3-ubyte"
    } else {
        "inputs.spkf"
    }
}

/// Writes network, weights, inputs and golden trace under `dir`. The trace
/// is computed from the inputs as read back from disk.
pub fn gen_fixture(dir: &Path, net: &NetworkSpec, seed: u64, count: usize) -> Result<FixtureSummary> {
    let fx = build(net, seed, count)?;
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    io::save_network(&dir.join(NETWORK_FILE), &fx.net)?;
    io::save_weights_csv(&dir.join(WEIGHTS_DIR), &fx.net, &fx.weights)?;
    let inputs = dir.join(inputs_file(&fx.net));
    if fx.net.input.c == 1 {
        let s = fx.net.input;
        let images: Vec<Vec<u8>> = fx.samples.iter().map(|x| idx::quantize(&x.frames[0])).collect();
        fs::write(&inputs, idx::write_images(&images, s.h, s.w)).map_err(Error::io(&inputs))?;
        let labels: Vec<u8> = fx.samples.iter().map(|x| x.label.unwrap_or(0) as u8).collect();
        let lp = dir.join("inputs-labels-idx1-ubyte");
        fs::write(&lp, idx::write_labels(&labels)).map_err(Error::io(&lp))?;
    } else if !fx.samples.is_empty() {
        io::write_frames_bin(&inputs, &fx.samples)?;
    }
    let samples = if fx.samples.is_empty() { Vec::new() } else { io::read_dataset(&inputs, fx.net.timesteps)? };
    let trace = golden_trace(&fx.net, &fx.weights, &samples, seed)?;
    let gp = dir.join(GOLDEN_FILE);
    let text = serde_json::to_string(&trace).map_err(|source| Error::Json { path: gp.clone(), source })?;
    fs::write(&gp, text).map_err(Error::io(&gp))?;
    summarize(dir)
}

/// Digests of every file under `dir`.
pub fn summarize(dir: &Path) -> Result<FixtureSummary> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(Error::io(&d))? {
            let p = entry.map_err(Error::io(&d))?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let bytes = fs::read(&p).map_err(Error::io(&p))?;
                let name = p.strip_prefix(dir).unwrap_or(&p).to_string_lossy().replace('\\', "/");
                files.push((name, sha256_hex(&bytes)));
            }
        }
    }
    files.sort();
    let lines: String = files.iter().map(|(n, d)| format!("{n}:{d}\n")).collect();
    Ok(FixtureSummary { digest: sha256_hex(lines.as_bytes()), files })
}

pub fn read_golden(path: &Path) -> Result<GoldenTrace> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::shipped_network;

    #[test]
    fn same_seed_same_digest() {
        let net = shipped_network("lenet-tiny").unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let sa = gen_fixture(a.path(), &net, 42, 6).unwrap();
        let sb = gen_fixture(b.path(), &net, 42, 6).unwrap();
        assert_eq!(sa, sb);
        let c = tempfile::tempdir().unwrap();
        assert_ne!(gen_fixture(c.path(), &net, 43, 6).unwrap().digest, sa.digest);
    }

    #[test]
    fn golden_matches_a_fresh_plaintext_run() {
        for name in ["lenet-tiny", "tiny"] {
            let d = tempfile::tempdir().unwrap();
            gen_fixture(d.path(), &shipped_network(name).unwrap(), 7, 4).unwrap();
            let net = io::load_network(d.path().join(NETWORK_FILE).to_str().unwrap()).unwrap();
            let w = io::load_weights_csv(&d.path().join(WEIGHTS_DIR), &net).unwrap();
            let samples = io::read_dataset(&d.path().join(inputs_file(&net)), net.timesteps).unwrap();
            let golden = read_golden(&d.path().join(GOLDEN_FILE)).unwrap();
            assert_eq!(golden, golden_trace(&net, &w, &samples, 7).unwrap());
            for (s, g) in samples.iter().zip(&golden.samples) {
                assert_eq!(s.label, g.prediction);
            }
        }
    }

    #[test]
    fn multichannel_fixture_uses_spkf() {
        let mut net = shipped_network("lenet-tiny").unwrap();
        net.input.c = 2;
        if let Layer::Conv { in_ch, .. } = &mut net.layers[0] {
            *in_ch = 2;
        }
        let d = tempfile::tempdir().unwrap();
        gen_fixture(d.path(), &net, 1, 3).unwrap();
        let s = io::read_frames_bin(&d.path().join("inputs.spkf")).unwrap();
        assert_eq!(s.len(), 3);
        assert_ne!(s[0].frames[0], s[0].frames[1]);
    }

    #[test]
    fn zero_weights_give_an_all_zero_trace() {
        let net = shipped_network("lenet-tiny").unwrap();
        let samples = random_samples(&net, 3, &mut ChaCha20Rng::seed_from_u64(3));
        let g = golden_trace(&net, &zero_weights(&net), &samples, 0).unwrap();
        for s in &g.samples {
            assert!(s.scores.iter().all(|&v| v == 0.0));
            for l in &s.layers {
                assert!(l.currents.iter().flatten().all(|&v| v == 0.0));
                assert!(l.spikes.iter().flatten().flatten().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn calibration_bounds_every_membrane() {
        let net = shipped_network("lenet-tiny").unwrap();
        let fx = build(&net, 11, 0).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let fresh = random_samples(&fx.net, 16, &mut rng);
        for s in &fresh {
            let run = run_inference_plain(&fx.net, &fx.weights, &s.frames).unwrap();
            for (l, t) in fx.net.layers.iter().zip(&run.layers) {
                if let Some(p) = l.lif() {
                    assert!(t.membrane_peak < p.scale_value, "{} >= {}", t.membrane_peak, p.scale_value);
                }
            }
        }
        let spiking = fresh
            .iter()
            .filter(|s| {
                let run = run_inference_plain(&fx.net, &fx.weights, &s.frames).unwrap();
                run.layers[0].spikes.as_ref().unwrap().iter().any(|t| t.data.contains(&1.0))
            })
            .count();
        assert!(spiking > 0);
    }
}
