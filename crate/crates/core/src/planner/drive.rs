//! The layer-by-layer, timestep-by-timestep driver shared by the static level
//! simulation and encrypted execution.
//!
//! Refresh placement is decided here from operand levels alone, so both
//! executors place exactly the same refreshes.

use alloc::vec::Vec;

use super::geometry::NetworkGeometry;
use super::{Event, EventKind, LedgerEntry, RefreshReason, RefreshTarget, RunLog};
use crate::approx::series_depth;
use crate::error::{Error, Result};
use crate::lif::LifMode;
use crate::network::{residual_specs, Layer, NetworkSpec};

/// Linear transforms inside a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Lin {
    Main,
    Second,
    Shortcut,
}

pub(crate) trait Exec {
    type Act: Clone;
    type Mem: Default;

    fn level(&self, x: &Self::Act) -> usize;
    fn n_cts(&self, x: &Self::Act) -> usize;
    fn bytes(&self, x: &Self::Act) -> usize;
    fn refresh(&mut self, x: &Self::Act) -> Result<Self::Act>;
    fn begin_layer(&mut self, i: usize) -> Result<()>;
    fn end_layer(&mut self, i: usize);
    fn linear(&mut self, i: usize, which: Lin, x: &Self::Act) -> Result<Self::Act>;
    fn add(&mut self, a: &Self::Act, b: &Self::Act) -> Result<Self::Act>;
    /// One LIF timestep of stage `stage` of layer `i`.
    fn lif(&mut self, i: usize, stage: usize, x: &Self::Act, mem: &mut Self::Mem) -> Result<Self::Act>;
    fn mem_level(&self, mem: &Self::Mem) -> Option<usize>;
    fn mem_bytes(&self, mem: &Self::Mem) -> usize;
    fn refresh_mem(&mut self, mem: &mut Self::Mem) -> Result<()>;
}

/// Levels consumed by a linear transform of `layer`.
pub(crate) fn linear_cost(layer: &Layer) -> usize {
    match layer {
        Layer::Fc { .. } => 2,
        _ => 1,
    }
}

/// Level requirements of one LIF step: `(input, membrane)`.
pub(crate) fn lif_requirements(mode: LifMode, degree: usize) -> (usize, usize) {
    match mode {
        // scaling, series, reset
        LifMode::Approx => (1 + series_depth(degree) + 1, 1 + series_depth(degree) + 1),
        // reset multiply; the membrane also pays the leak
        LifMode::Switch => (1, 2),
    }
}

pub(crate) struct Driver<'a, C: FnMut() -> f64> {
    pub net: &'a NetworkSpec,
    pub mode: LifMode,
    pub depth: usize,
    pub clock: C,
    pub log: RunLog,
}

impl<C: FnMut() -> f64> Driver<'_, C> {
    fn event(&mut self, layer: usize, t: usize, kind: EventKind) {
        self.log.events.push(Event { layer, t, kind });
    }

    fn reason(&self, pool: bool) -> RefreshReason {
        if pool {
            RefreshReason::PrePool
        } else {
            RefreshReason::Interval
        }
    }

    /// Refreshes `x` when it cannot pay `cost` levels.
    fn ensure<E: Exec>(&mut self, e: &mut E, i: usize, t: usize, x: E::Act, cost: usize, reason: RefreshReason, force: bool) -> Result<E::Act> {
        if cost > self.depth {
            return Err(Error::Parameter(alloc::format!(
                "layer {i} needs {cost} levels, the parameter set has {}",
                self.depth
            )));
        }
        let level = e.level(&x);
        if level < cost || (force && level < self.depth) {
            let n = e.n_cts(&x);
            self.event(i, t, EventKind::Refresh { reason, target: RefreshTarget::Activation, ciphertexts: n });
            return e.refresh(&x);
        }
        Ok(x)
    }

    /// One LIF step with its refreshes; returns spikes and whether anything was refreshed.
    fn lif<E: Exec>(&mut self, e: &mut E, i: usize, stage: usize, t: usize, x: E::Act, mem: &mut E::Mem) -> Result<(E::Act, bool)> {
        let params = self.net.layers[i].lif().copied().unwrap_or_default();
        let (need_in, need_mem) = lif_requirements(self.mode, params.degree);
        if need_in.max(need_mem) > self.depth {
            return Err(Error::Parameter(alloc::format!(
                "layer {i}: a {} LIF step needs {} levels, the parameter set has {}",
                self.mode.name(),
                need_in.max(need_mem),
                self.depth
            )));
        }
        let reason = match self.mode {
            LifMode::Approx => RefreshReason::PreSpike,
            LifMode::Switch => RefreshReason::Interval,
        };
        let mut refreshed = false;
        let mut x = x;
        if e.level(&x) < need_in {
            let n = e.n_cts(&x);
            self.event(i, t, EventKind::Refresh { reason, target: RefreshTarget::Activation, ciphertexts: n });
            x = e.refresh(&x)?;
            refreshed = true;
        }
        if t > 1 {
            let level = e
                .mem_level(mem)
                .ok_or_else(|| Error::PlannerContract(alloc::format!("layer {i}: membrane missing at t={t}")))?;
            if self.mode == LifMode::Approx || level < need_mem {
                let n = e.n_cts(&x);
                self.event(i, t, EventKind::Refresh { reason, target: RefreshTarget::Membrane, ciphertexts: n });
                e.refresh_mem(mem)?;
                refreshed = true;
            }
        }
        if self.mode == LifMode::Switch {
            let n = e.n_cts(&x);
            self.event(i, t, EventKind::Compare { ciphertexts: n });
        }
        Ok((e.lif(i, stage, &x, mem)?, refreshed))
    }

    /// Evaluates every layer over all timesteps; returns the per-timestep outputs.
    pub fn run<E: Exec>(&mut self, e: &mut E, inputs: Vec<E::Act>) -> Result<Vec<E::Act>> {
        if inputs.len() != self.net.timesteps {
            return Err(Error::Validation(alloc::format!(
                "{} input frames for {} timesteps",
                inputs.len(),
                self.net.timesteps
            )));
        }
        let mut acts = inputs;
        let mut prev_lif_refreshed = alloc::vec![false; acts.len()];
        self.track_memory(e, &acts, 0);
        for (i, layer) in self.net.layers.iter().enumerate() {
            let ctx = |err: Error, t: usize| err.context(alloc::format!("layer {i} ({}), t={t}", layer.kind()));
            e.begin_layer(i).map_err(|err| ctx(err, 0))?;
            let stages = match layer {
                Layer::ResidualBlock { .. } => 2,
                _ => 1,
            };
            let mut mems: Vec<E::Mem> = (0..stages).map(|_| E::Mem::default()).collect();
            for t in 1..=acts.len() {
                let start = (self.clock)();
                let x = acts[t - 1].clone();
                let level_in = e.level(&x);
                let (y, refreshed) = self
                    .layer_step(e, i, t, layer, x, &mut mems, prev_lif_refreshed[t - 1])
                    .map_err(|err| ctx(err, t))?;
                let level_out = e.level(&y);
                acts[t - 1] = y;
                prev_lif_refreshed[t - 1] = refreshed;
                let seconds = (self.clock)() - start;
                self.log.ledger.push(LedgerEntry { layer: i, t, level_in, level_out, seconds });
                let mem_bytes: usize = mems.iter().map(|m| e.mem_bytes(m)).sum();
                self.track_memory(e, &acts, mem_bytes);
            }
            e.end_layer(i);
        }
        Ok(acts)
    }

    fn track_memory<E: Exec>(&mut self, e: &E, acts: &[E::Act], extra: usize) {
        let live: usize = acts.iter().map(|a| e.bytes(a)).sum::<usize>() + extra;
        self.log.peak_bytes = self.log.peak_bytes.max(live);
    }

    #[allow(clippy::too_many_arguments)]
    fn layer_step<E: Exec>(
        &mut self,
        e: &mut E,
        i: usize,
        t: usize,
        layer: &Layer,
        x: E::Act,
        mems: &mut [E::Mem],
        prev_refreshed: bool,
    ) -> Result<(E::Act, bool)> {
        let cost = linear_cost(layer);
        match layer {
            Layer::Conv { lif, .. } | Layer::Fc { lif, .. } => {
                let x = self.ensure(e, i, t, x, cost, self.reason(false), false)?;
                let y = e.linear(i, Lin::Main, &x)?;
                match lif {
                    Some(_) => self.lif(e, i, 0, t, y, &mut mems[0]),
                    None => Ok((y, false)),
                }
            }
            Layer::Avgpool { .. } => {
                // after a refreshed approximate LIF the pool input is refreshed too
                let force = self.mode == LifMode::Approx && prev_refreshed;
                let x = self.ensure(e, i, t, x, cost, self.reason(true), force)?;
                Ok((e.linear(i, Lin::Main, &x)?, false))
            }
            Layer::Lif { .. } => self.lif(e, i, 0, t, x, &mut mems[0]),
            Layer::ResidualBlock { in_ch, out_ch, kernel, stride, padding, .. } => {
                let identity = residual_specs(*in_ch, *out_ch, *kernel, *stride, *padding).shortcut.is_none();
                let x = self.ensure(e, i, t, x, 1, self.reason(false), false)?;
                let m = e.linear(i, Lin::Main, &x)?;
                let (s, r1) = self.lif(e, i, 0, t, m, &mut mems[0])?;
                let s = self.ensure(e, i, t, s, 1, self.reason(false), false)?;
                let y = e.linear(i, Lin::Second, &s)?;
                let short = if identity {
                    x
                } else {
                    e.linear(i, Lin::Shortcut, &x)?
                };
                let j = e.add(&y, &short)?;
                let (out, r2) = self.lif(e, i, 1, t, j, &mut mems[1])?;
                Ok((out, r1 || r2))
            }
        }
    }
}

/// Executor that tracks levels only.
pub(crate) struct LevelExec<'a> {
    pub net: &'a NetworkSpec,
    pub geometry: &'a NetworkGeometry,
    pub mode: LifMode,
    pub depth: usize,
    /// Bytes of one ciphertext limb pair (`2·N·8`).
    pub limb_bytes: usize,
}

/// Abstract activation: level and ciphertext count.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LevelAct {
    pub level: usize,
    pub cts: usize,
}

#[derive(Debug, Default)]
pub(crate) struct LevelMem {
    level: Option<usize>,
    cts: usize,
}

impl LevelExec<'_> {
    fn exhausted(op: &'static str, required: usize, available: usize) -> Error {
        Error::LevelExhausted { op, required, available }
    }
}

impl Exec for LevelExec<'_> {
    type Act = LevelAct;
    type Mem = LevelMem;

    fn level(&self, x: &LevelAct) -> usize {
        x.level
    }
    fn n_cts(&self, x: &LevelAct) -> usize {
        x.cts
    }
    fn bytes(&self, x: &LevelAct) -> usize {
        x.cts * (x.level + 1) * self.limb_bytes
    }
    fn refresh(&mut self, x: &LevelAct) -> Result<LevelAct> {
        Ok(LevelAct { level: self.depth, cts: x.cts })
    }
    fn begin_layer(&mut self, _: usize) -> Result<()> {
        Ok(())
    }
    fn end_layer(&mut self, _: usize) {}

    fn linear(&mut self, i: usize, which: Lin, x: &LevelAct) -> Result<LevelAct> {
        let g = &self.geometry.layers[i];
        let cost = linear_cost(&self.net.layers[i]);
        if x.level < cost {
            return Err(Self::exhausted("linear_layer", cost, x.level));
        }
        let out = match which {
            Lin::Main if g.mid.is_some() => g.mid.unwrap(),
            _ => g.output,
        };
        Ok(LevelAct { level: x.level - cost, cts: out.n_cts })
    }

    fn add(&mut self, a: &LevelAct, b: &LevelAct) -> Result<LevelAct> {
        Ok(LevelAct { level: a.level.min(b.level), cts: a.cts })
    }

    fn lif(&mut self, i: usize, _: usize, x: &LevelAct, mem: &mut LevelMem) -> Result<LevelAct> {
        let degree = self.net.layers[i].lif().map_or(crate::approx::DEFAULT_DEGREE, |p| p.degree);
        let series = series_depth(degree);
        let (lead, tail) = match self.mode {
            LifMode::Approx => (1, series + 1),
            LifMode::Switch => (0, 1),
        };
        let mut u = x.level.checked_sub(lead).ok_or_else(|| Self::exhausted("lif_scale", lead, x.level))?;
        if let Some(v) = mem.level {
            u = u.min(v.checked_sub(1).ok_or_else(|| Self::exhausted("lif_leak", 1, v))?);
        }
        if u < tail {
            return Err(Self::exhausted("lif_step", tail, u));
        }
        mem.level = Some(u - tail);
        mem.cts = x.cts;
        let spikes = match self.mode {
            LifMode::Approx => u - series,
            LifMode::Switch => self.depth,
        };
        Ok(LevelAct { level: spikes, cts: x.cts })
    }

    fn mem_level(&self, mem: &LevelMem) -> Option<usize> {
        mem.level
    }
    fn mem_bytes(&self, mem: &LevelMem) -> usize {
        mem.level.map_or(0, |l| mem.cts * (l + 1) * self.limb_bytes)
    }
    fn refresh_mem(&mut self, mem: &mut LevelMem) -> Result<()> {
        mem.level = Some(self.depth);
        Ok(())
    }
}
