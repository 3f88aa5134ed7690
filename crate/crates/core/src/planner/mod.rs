//! Rotation harvesting, refresh scheduling and the inference drivers.

mod drive;
mod exec;
mod geometry;
mod plain;

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

pub use geometry::{plan_layouts, LayerGeometry, NetworkGeometry};
pub use plain::{run_inference_plain, LayerTrace, PlainRun};

use crate::backend::HeBackend;
use crate::error::{Error, Result};
use crate::layers::{LayerStats, PackedTensor, Tensor};
use crate::lif::{argmax, LifMode};
use crate::network::{NetworkSpec, NetworkWeights};
use drive::{Driver, LevelAct, LevelExec};
use exec::BackendExec;

/// Every rotation index a network needs, with per-layer provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RotationPlan {
    pub indices: BTreeSet<i64>,
    pub per_layer: Vec<BTreeSet<i64>>,
}

impl RotationPlan {
    pub fn len(&self) -> usize {
        self.indices.len()
    }
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
    pub fn to_vec(&self) -> Vec<i64> {
        self.indices.iter().copied().collect()
    }
}

/// Rotation indices from layer shapes alone; independent of the timestep count.
pub fn harvest_rotations(net: &NetworkSpec, slots: usize) -> Result<RotationPlan> {
    let g = plan_layouts(net, slots)?;
    let per_layer: Vec<BTreeSet<i64>> = g.layers.iter().map(|l| l.rotations.clone()).collect();
    Ok(RotationPlan {
        indices: per_layer.iter().flatten().copied().collect(),
        per_layer,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RefreshReason {
    /// Before a spike evaluation.
    PreSpike,
    /// Before an average pool.
    PrePool,
    /// Whenever the next operation would run out of levels.
    Interval,
}

impl RefreshReason {
    pub fn name(self) -> &'static str {
        match self {
            RefreshReason::PreSpike => "pre-spike",
            RefreshReason::PrePool => "pre-pool",
            RefreshReason::Interval => "interval",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RefreshTarget {
    Activation,
    Membrane,
}

impl RefreshTarget {
    pub fn name(self) -> &'static str {
        match self {
            RefreshTarget::Activation => "activation",
            RefreshTarget::Membrane => "membrane",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Refresh {
        reason: RefreshReason,
        target: RefreshTarget,
        ciphertexts: usize,
    },
    Compare {
        ciphertexts: usize,
    },
}

/// One use of the secret-key holding authority.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub layer: usize,
    /// 1-based timestep.
    pub t: usize,
    pub kind: EventKind,
}

impl Event {
    /// Audit-log operation name.
    pub fn audit_op(&self) -> &'static str {
        match self.kind {
            EventKind::Refresh { .. } => "TEST-MODE-RECRYPTION",
            EventKind::Compare { .. } => "TEST-MODE-SWITCH",
        }
    }
}

/// Levels around one (layer, timestep) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    pub layer: usize,
    pub t: usize,
    pub level_in: usize,
    pub level_out: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub events: Vec<Event>,
    pub ledger: Vec<LedgerEntry>,
    /// Largest total size of live activations and membranes.
    pub peak_bytes: usize,
}

impl RunLog {
    pub fn schedule(&self) -> RefreshSchedule {
        RefreshSchedule {
            points: self
                .events
                .iter()
                .filter_map(|e| match e.kind {
                    EventKind::Refresh { reason, target, ciphertexts } => Some(RefreshPoint {
                        layer: e.layer,
                        t: e.t,
                        reason,
                        target,
                        ciphertexts,
                    }),
                    EventKind::Compare { .. } => None,
                })
                .collect(),
        }
    }

    pub fn compares(&self) -> usize {
        self.events
            .iter()
            .map(|e| match e.kind {
                EventKind::Compare { ciphertexts } => ciphertexts,
                EventKind::Refresh { .. } => 0,
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefreshPoint {
    pub layer: usize,
    pub t: usize,
    pub reason: RefreshReason,
    pub target: RefreshTarget,
    pub ciphertexts: usize,
}

/// Ordered refresh points of one network, parameter set and LIF mode.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RefreshSchedule {
    pub points: Vec<RefreshPoint>,
}

impl RefreshSchedule {
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    /// Refreshed ciphertexts in total.
    pub fn ciphertexts(&self) -> usize {
        self.points.iter().map(|p| p.ciphertexts).sum()
    }
}

/// What the static simulation needs to know about a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelBudget {
    pub depth: usize,
    pub slots: usize,
    /// Ring dimension, for memory estimates.
    pub ring_n: usize,
}

/// Runs the network on levels only, placing refreshes exactly as encrypted
/// execution will.
pub fn simulate_levels(net: &NetworkSpec, budget: &LevelBudget, mode: LifMode) -> Result<RunLog> {
    let geometry = plan_layouts(net, budget.slots)?;
    for (i, l) in net.layers.iter().enumerate() {
        if let Some(p) = l.lif() {
            p.config(mode).validate().map_err(|e| e.context(alloc::format!("layer {i}")))?;
        }
    }
    let mut exec = LevelExec {
        net,
        geometry: &geometry,
        mode,
        depth: budget.depth,
        limb_bytes: 2 * budget.ring_n * 8,
    };
    let mut driver = Driver {
        net,
        mode,
        depth: budget.depth,
        clock: || 0.0,
        log: RunLog::default(),
    };
    let inputs = (0..net.timesteps)
        .map(|_| LevelAct {
            level: budget.depth,
            cts: geometry.input.n_cts,
        })
        .collect();
    driver.run(&mut exec, inputs).map_err(|e| match e.root() {
        Error::LevelExhausted { .. } => Error::Parameter(alloc::format!("level budget unsatisfiable: {e}")),
        _ => e,
    })?;
    Ok(driver.log)
}

/// Refresh points for `net` under `budget`.
pub fn schedule_refresh(net: &NetworkSpec, budget: &LevelBudget, mode: LifMode) -> Result<RefreshSchedule> {
    Ok(simulate_levels(net, budget, mode)?.schedule())
}

/// Packs and encrypts one frame per timestep at the top level.
pub fn encrypt_frames<B: HeBackend>(b: &B, net: &NetworkSpec, frames: &[Tensor]) -> Result<Vec<PackedTensor<B>>> {
    let g = plan_layouts(net, b.slots())?;
    frames
        .iter()
        .map(|f| PackedTensor::encrypt(b, f, g.input, b.depth()))
        .collect()
}

/// Encrypted run of one input.
pub struct Inference<B: HeBackend> {
    /// Network output summed over timesteps.
    pub scores: PackedTensor<B>,
    pub log: RunLog,
    /// Rotations and plaintext products per layer, all timesteps together.
    pub stats: Vec<LayerStats>,
}

impl<B: HeBackend> Inference<B> {
    /// Decrypts the summed scores; returns them and the winning index.
    pub fn decode(&self, b: &B) -> Result<(Vec<f64>, usize)> {
        let scores = self.scores.decrypt(b)?.data;
        let class = argmax(&scores, scores.len()).ok_or_else(|| Error::PlannerContract("empty output".into()))?;
        Ok((scores, class))
    }
}

/// Evaluates `net` layer by layer across all timesteps of `inputs`.
///
/// `clock` returns seconds and is only used for the per-cell timings.
pub fn run_inference<B: HeBackend>(
    b: &B,
    net: &NetworkSpec,
    weights: &NetworkWeights,
    inputs: Vec<PackedTensor<B>>,
    mode: LifMode,
    clock: impl FnMut() -> f64,
) -> Result<Inference<B>> {
    weights.check(net)?;
    let geometry = plan_layouts(net, b.slots())?;
    if let Some(&k) = geometry.layers.iter().flat_map(|l| &l.rotations).find(|&&k| !b.has_rotation(k)) {
        return Err(Error::MissingKey(k));
    }
    if let Some(x) = inputs.iter().find(|x| x.layout != geometry.input) {
        return Err(Error::PlannerContract(alloc::format!(
            "input layout {:?} differs from the planned {:?}",
            x.layout,
            geometry.input
        )));
    }
    let mut exec = BackendExec::new(b, net, weights, &geometry, mode);
    let mut driver = Driver {
        net,
        mode,
        depth: b.depth(),
        clock,
        log: RunLog::default(),
    };
    let outputs = driver.run(&mut exec, inputs)?;
    let mut iter = outputs.into_iter();
    let mut scores = iter
        .next()
        .ok_or_else(|| Error::PlannerContract("no timesteps".into()))?;
    for o in iter {
        scores.cts = scores
            .cts
            .iter()
            .zip(&o.cts)
            .map(|(a, c)| b.add(a, c))
            .collect::<Result<_>>()?;
    }
    Ok(Inference {
        scores,
        log: driver.log,
        stats: exec.stats,
    })
}
