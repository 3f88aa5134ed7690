//! The operations behind each subcommand.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use snnhe_core::backend::{CkksBackend, HeBackend, SimBackend, SimConfig};
use snnhe_core::ckks::{CkksContext, CkksParams};
use snnhe_core::layers::LayerStats;
use snnhe_core::lif::{argmax, LifMode};
use snnhe_core::network::{Layer, LayerWeights, NetworkSpec, NetworkWeights};
use snnhe_core::planner::{encrypt_frames, run_inference, run_inference_plain, simulate_levels, LevelBudget, RunLog};

use crate::error::{Error, Result};
use crate::fixtures::{self, FixtureSummary};
use crate::io::{self, Sample};
use crate::keys::{self, KeyManifest};
use crate::report::{rate, Agreement, RunReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendChoice {
    Ckks,
    Sim,
}

impl BackendChoice {
    pub fn name(self) -> &'static str {
        match self {
            BackendChoice::Ckks => "ckks",
            BackendChoice::Sim => "sim",
        }
    }
}

impl std::str::FromStr for BackendChoice {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ckks" => Ok(BackendChoice::Ckks),
            "sim" => Ok(BackendChoice::Sim),
            o => Err(format!("unknown backend `{o}` (expected ckks or sim)")),
        }
    }
}

fn validation(msg: impl Into<String>) -> Error {
    Error::Core(snnhe_core::Error::Validation(msg.into()))
}

pub fn keygen(net: &str, profile: &str, seed: u64, out: &Path) -> Result<KeyManifest> {
    let net = io::load_network(net)?;
    let params = CkksParams::by_name(profile)?;
    let (_, keys) = keys::generate(&params, &net, seed)?;
    keys::save(out, &params, &net, seed, &keys)
}

/// Weights from a CSV directory, or empty weights for networks without
/// weighted layers.
pub fn load_weights(dir: Option<&Path>, net: &NetworkSpec) -> Result<NetworkWeights> {
    match dir {
        Some(d) => io::load_weights_csv(d, net),
        None => {
            let w = NetworkWeights { layers: vec![LayerWeights::None; net.layers.len()] };
            if let Some(i) = net.layers.iter().position(|l| !matches!(l, Layer::Avgpool { .. } | Layer::Lif { .. })) {
                return Err(validation(format!("layer {i} ({}) needs weights (--weights)", net.layers[i].kind())));
            }
            Ok(w)
        }
    }
}

/// What a run needs besides the data.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: LifMode,
    pub backend: BackendChoice,
    pub keys: Option<PathBuf>,
    /// Parameter profile for the sim backend when no key directory is given.
    pub profile: String,
    /// Also run the plaintext network and compare.
    pub compare_plaintext: bool,
    pub command: String,
}

struct Outcome {
    scores: Vec<f64>,
    prediction: usize,
    plaintext: Option<usize>,
    log: RunLog,
    stats: Vec<LayerStats>,
}

fn run_one<B: HeBackend>(b: &B, net: &NetworkSpec, w: &NetworkWeights, s: &Sample, cfg: &RunConfig) -> Result<Outcome> {
    let start = Instant::now();
    let inputs = encrypt_frames(b, net, &s.frames)?;
    let inf = run_inference(b, net, w, inputs, cfg.mode, move || start.elapsed().as_secs_f64())?;
    let (scores, prediction) = inf.decode(b)?;
    let plaintext = if cfg.compare_plaintext {
        let run = run_inference_plain(net, w, &s.frames)?;
        argmax(&run.scores, run.scores.len())
    } else {
        None
    };
    Ok(Outcome { scores, prediction, plaintext, log: inf.log, stats: inf.stats })
}

fn run_all<B: HeBackend>(b: &B, net: &NetworkSpec, w: &NetworkWeights, samples: &[Sample], cfg: &RunConfig) -> Result<Vec<Outcome>> {
    samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            run_one(b, net, w, s, cfg).map_err(|e| match e {
                Error::Core(c) => Error::Core(c.context(format!("input {i}"))),
                other => other,
            })
        })
        .collect()
}

fn seed_bytes(seed: u64) -> [u8; 32] {
    let mut out = [0u8; 32];
    out[..8].copy_from_slice(&seed.to_le_bytes());
    out
}

/// Runs every sample on the chosen backend and assembles the report.
pub fn run(net: &NetworkSpec, weights: &NetworkWeights, samples: &[Sample], cfg: &RunConfig) -> Result<RunReport> {
    let t0 = Instant::now();
    weights.check(net)?;
    if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| s.frames.len() != net.timesteps) {
        return Err(validation(format!("input {i} has {} frames, the network runs {} timesteps", s.frames.len(), net.timesteps)));
    }
    let manifest = cfg.keys.as_deref().map(keys::read_manifest).transpose()?;
    let profile = manifest.as_ref().map_or(cfg.profile.clone(), |m| m.profile.clone());
    let params = CkksParams::by_name(&profile)?;
    let (outcomes, key_bytes) = match cfg.backend {
        BackendChoice::Sim => {
            let b = SimBackend::new(SimConfig::new(params.slots(), params.depth()))?;
            (run_all(&b, net, weights, samples, cfg)?, 0)
        }
        BackendChoice::Ckks => {
            let dir = cfg.keys.as_deref().ok_or_else(|| validation("the ckks backend needs --keys"))?;
            let (params, keyset, m) = keys::load(dir)?;
            let key_bytes = m.total_bytes() - m.files.iter().find(|f| f.name == "secret.key").map_or(0, |f| f.bytes);
            let b = CkksBackend::with_keys(CkksContext::new(params), keyset, seed_bytes(m.seed));
            (run_all(&b, net, weights, samples, cfg)?, key_bytes)
        }
    };
    let budget = LevelBudget { depth: params.depth(), slots: params.slots(), ring_n: params.n() };
    let planned = simulate_levels(net, &budget, cfg.mode)?.schedule();
    let first = outcomes.first();
    let (cells, events) = first.map_or((Vec::new(), Vec::new()), |o| RunReport::log_sections(net, &o.log));
    let labels: Vec<Option<usize>> = samples.iter().map(|s| s.label).collect();
    let predictions: Vec<usize> = outcomes.iter().map(|o| o.prediction).collect();
    let plaintext: Option<Vec<usize>> = cfg
        .compare_plaintext
        .then(|| outcomes.iter().map(|o| o.plaintext.unwrap_or(usize::MAX)).collect());
    let agreement = plaintext.as_ref().map(|plain| {
        let labelled = || labels.iter().enumerate().filter_map(|(i, l)| l.map(|l| (i, l)));
        Agreement {
            plaintext_accuracy: rate(labelled().map(|(i, l)| (plain[i], l))),
            encrypted_accuracy: rate(labelled().map(|(i, l)| (predictions[i], l))),
            agreement: rate(predictions.iter().copied().zip(plain.iter().copied())),
            labelled: labelled().count(),
        }
    });
    let peak = first.map_or(0, |o| o.log.peak_bytes);
    Ok(RunReport {
        command: cfg.command.clone(),
        network: net.name.clone(),
        profile,
        backend: cfg.backend.name().into(),
        mode: cfg.mode.name().into(),
        timesteps: net.timesteps,
        inputs: samples.len(),
        predictions,
        labels,
        plaintext_predictions: plaintext,
        scores: outcomes.iter().map(|o| o.scores.clone()).collect(),
        agreement,
        cells,
        events,
        schedule_matches_plan: first.map_or(true, |o| o.log.schedule() == planned),
        refreshes_per_input: first.map_or(planned.len(), |o| o.log.schedule().len()),
        compares_per_input: first.map_or(0, |o| o.log.compares()),
        layer_ops: first.map_or(Vec::new(), |o| RunReport::layer_ops(net, &o.stats)),
        peak_ciphertext_bytes: peak,
        key_bytes,
        peak_memory_bytes: peak + key_bytes,
        wall_seconds: t0.elapsed().as_secs_f64(),
    })
}

/// Encrypted inference over every sample in `input`.
pub fn infer(net: &str, weights: Option<&Path>, input: &Path, cfg: &RunConfig) -> Result<RunReport> {
    let net = io::load_network(net)?;
    let w = load_weights(weights, &net)?;
    let samples = io::read_dataset(input, net.timesteps)?;
    run(&net, &w, &samples, cfg)
}

/// Plaintext and encrypted inference over the first `count` samples.
pub fn evaluate(net: &str, weights: Option<&Path>, dataset: &Path, count: usize, cfg: &RunConfig) -> Result<RunReport> {
    let net = io::load_network(net)?;
    let w = load_weights(weights, &net)?;
    let mut samples = io::read_dataset(dataset, net.timesteps)?;
    if count > samples.len() {
        return Err(validation(format!("{count} samples requested, the dataset holds {}", samples.len())));
    }
    samples.truncate(count);
    run(&net, &w, &samples, &RunConfig { compare_plaintext: true, ..cfg.clone() })
}

pub fn gen_fixture(net: &str, seed: u64, count: usize, out: &Path) -> Result<FixtureSummary> {
    let net = io::load_network(net)?;
    fixtures::gen_fixture(out, &net, seed, count)
}
