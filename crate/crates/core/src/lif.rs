//! Leaky integrate-and-fire neurons: plaintext reference and the two
//! encrypted evaluators.
//!
//! All three share the update `U = I` at `t = 1`, `U = τ·V + I` afterwards,
//! spike iff `U > Th`, and reset by multiplication: `V' = (1 - s)·U`.

use alloc::vec::Vec;
use core::str::FromStr;

use crate::approx::{eval_series_encrypted, fit_step, scale_to_interval, series_depth, ChebyshevSeries, DEFAULT_DEGREE};
use crate::backend::{Cv, HeBackend, ScaleTag};
use crate::error::{Error, Result};

pub const DEFAULT_TAU: f64 = 0.25;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LifMode {
    /// Polynomial step approximation.
    Approx,
    /// Exact comparison through the comparison authority.
    Switch,
}

impl LifMode {
    pub fn name(self) -> &'static str {
        match self {
            LifMode::Approx => "approx",
            LifMode::Switch => "switch",
        }
    }
}

impl FromStr for LifMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "approx" => Ok(LifMode::Approx),
            "switch" => Ok(LifMode::Switch),
            _ => Err(Error::Validation(alloc::format!("unknown LIF mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifConfig {
    /// Leak multiplier applied to the carried membrane, in `(0, 1)`.
    pub tau: f64,
    /// Firing threshold in natural units.
    pub threshold: f64,
    /// Divisor mapping membrane values into `[-1, 1]` for the approximation.
    pub scale_value: f64,
    pub degree: usize,
    pub mode: LifMode,
}

impl LifConfig {
    pub fn new(mode: LifMode, scale_value: f64) -> Self {
        LifConfig {
            tau: DEFAULT_TAU,
            threshold: DEFAULT_THRESHOLD,
            scale_value,
            degree: DEFAULT_DEGREE,
            mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Validation(alloc::format!("leak {} outside (0, 1)", self.tau)));
        }
        if !(self.scale_value > 0.0 && self.scale_value.is_finite()) {
            return Err(Error::Validation(alloc::format!("scale value {} must be positive", self.scale_value)));
        }
        if !self.threshold.is_finite() {
            return Err(Error::Validation("threshold must be finite".into()));
        }
        if self.mode == LifMode::Approx {
            let th = self.scaled_threshold();
            if !(th > -1.0 && th < 1.0) {
                return Err(Error::Validation(alloc::format!(
                    "scaled threshold {th} outside (-1, 1); raise the scale value"
                )));
            }
        }
        Ok(())
    }

    pub fn scaled_threshold(&self) -> f64 {
        self.threshold / self.scale_value
    }

    /// Step series at the scaled threshold.
    pub fn series(&self) -> Result<ChebyshevSeries> {
        self.validate()?;
        fit_step(self.scaled_threshold(), self.degree)
    }

    /// Levels one step consumes from the lower of the membrane and input levels.
    pub fn step_depth(&self, t: usize) -> usize {
        match self.mode {
            LifMode::Approx => 1 + series_depth(self.degree) + 1,
            // leak multiply, then the reset multiply
            LifMode::Switch => usize::from(t > 1) + 1,
        }
    }
}

/// Plaintext reference step; returns `(spikes, V')`.
pub fn lif_plain_step(v: &[f64], input: &[f64], t: usize, cfg: &LifConfig) -> (Vec<f64>, Vec<f64>) {
    debug_assert!(t == 1 || v.len() == input.len());
    let mut spikes = Vec::with_capacity(input.len());
    let mut next = Vec::with_capacity(input.len());
    for (k, &i) in input.iter().enumerate() {
        let u = if t == 1 { i } else { cfg.tau * v[k] + i };
        let s = if u > cfg.threshold { 1.0 } else { 0.0 };
        spikes.push(s);
        next.push((1.0 - s) * u);
    }
    (spikes, next)
}

/// Membrane potential carried between timesteps of one ciphertext.
#[derive(Debug, Clone)]
pub struct Membrane<B: HeBackend> {
    v: Option<Cv<B>>,
    t: usize,
}

impl<B: HeBackend> Default for Membrane<B> {
    fn default() -> Self {
        Membrane { v: None, t: 0 }
    }
}

impl<B: HeBackend> Membrane<B> {
    pub fn new() -> Self {
        Self::default()
    }
    /// Timestep the next update belongs to (1-based).
    pub fn next_t(&self) -> usize {
        self.t + 1
    }
    pub fn potential(&self) -> Option<&Cv<B>> {
        self.v.as_ref()
    }
    pub fn level(&self) -> Option<usize> {
        self.v.as_ref().map(|v| v.level())
    }
    /// Replaces the carried potential, e.g. with a refreshed copy.
    pub fn set_potential(&mut self, v: Cv<B>) {
        self.v = Some(v);
    }
}

fn accumulate<B: HeBackend>(b: &B, v: Option<&Cv<B>>, input: &Cv<B>, t: usize, tau: f64) -> Result<Cv<B>> {
    match (t, v) {
        (1, _) => Ok(input.clone()),
        (_, Some(v)) => {
            let leaked = b.mul_const(v, tau)?;
            b.add(&leaked, input)
        }
        (_, None) => Err(Error::PlannerContract(alloc::format!(
            "membrane missing at t={t}"
        ))),
    }
}

/// Approximate step; returns `(spikes, V')`.
///
/// `V` is carried in the scaled domain: `v` must be tagged
/// `Scaled(scale_value)` and `input` `Natural`. Spikes are `Natural`.
/// Consumes `cfg.step_depth(t)` levels.
pub fn lif_approx_step<B: HeBackend>(
    b: &B,
    v: Option<&Cv<B>>,
    input: &Cv<B>,
    t: usize,
    cfg: &LifConfig,
    series: &ChebyshevSeries,
    mask: Option<&[f64]>,
) -> Result<(Cv<B>, Cv<B>)> {
    if t == 0 {
        return Err(Error::PlannerContract("timesteps start at 1".into()));
    }
    if input.tag() != ScaleTag::Natural {
        return Err(Error::DomainMismatch(alloc::format!("LIF input tagged {:?}", input.tag())));
    }
    let scaled_in = scale_to_interval(b, input, cfg.scale_value)?;
    let u = accumulate(b, v, &scaled_in, t, cfg.tau)?;
    let spikes = eval_series_encrypted(b, &u, series, mask)?;
    let keep = b.add_const(&b.negate(&spikes), 1.0)?;
    let next = b.mul(&keep, &u)?;
    Ok((spikes, next))
}

/// Exact step through the comparison authority; returns `(spikes, V')`.
///
/// `thresholds` encrypts `Th` in every slot. Spikes come back at the
/// authority's fresh level; `V'` sits one level below the accumulated `U`.
pub fn lif_switch_step<B: HeBackend>(
    b: &B,
    v: Option<&Cv<B>>,
    input: &Cv<B>,
    thresholds: &Cv<B>,
    t: usize,
    cfg: &LifConfig,
) -> Result<(Cv<B>, Cv<B>)> {
    if t == 0 {
        return Err(Error::PlannerContract("timesteps start at 1".into()));
    }
    let u = accumulate(b, v, input, t, cfg.tau)?;
    // 1 where U ≤ Th: the inverse spike state
    let keep = b.exact_compare(&u, thresholds)?;
    let spikes = b.add_const(&b.negate(&keep), 1.0)?;
    let next = b.mul(&keep, &u)?;
    Ok((spikes, next))
}

/// One LIF layer's evaluator: configuration plus the fitted series.
#[derive(Debug, Clone)]
pub struct LifEvaluator {
    cfg: LifConfig,
    series: Option<ChebyshevSeries>,
}

impl LifEvaluator {
    pub fn new(cfg: LifConfig) -> Result<Self> {
        cfg.validate()?;
        let series = match cfg.mode {
            LifMode::Approx => Some(cfg.series()?),
            LifMode::Switch => None,
        };
        Ok(LifEvaluator { cfg, series })
    }

    pub fn config(&self) -> &LifConfig {
        &self.cfg
    }

    pub fn series(&self) -> Option<&ChebyshevSeries> {
        self.series.as_ref()
    }

    /// Advances `state` by one timestep and returns the spikes.
    pub fn step<B: HeBackend>(
        &self,
        b: &B,
        state: &mut Membrane<B>,
        input: &Cv<B>,
        thresholds: Option<&Cv<B>>,
        mask: Option<&[f64]>,
    ) -> Result<Cv<B>> {
        let t = state.next_t();
        let (spikes, next) = match &self.series {
            Some(series) => lif_approx_step(b, state.v.as_ref(), input, t, &self.cfg, series, mask)?,
            None => {
                let th = thresholds.ok_or(Error::CompareUnavailable)?;
                lif_switch_step(b, state.v.as_ref(), input, th, t, &self.cfg)?
            }
        };
        state.v = Some(next);
        state.t = t;
        Ok(spikes)
    }
}

/// Sums per-timestep class scores homomorphically.
pub fn sum_outputs<B: HeBackend>(b: &B, outputs: &[Cv<B>]) -> Result<Cv<B>> {
    let (first, rest) = outputs
        .split_first()
        .ok_or_else(|| Error::PlannerContract("no timestep outputs to decode".into()))?;
    rest.iter().try_fold(first.clone(), |acc, x| b.add(&acc, x))
}

/// Index of the largest of the first `classes` values; ties go to the lowest index.
pub fn argmax(values: &[f64], classes: usize) -> Option<usize> {
    values
        .iter()
        .take(classes)
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

/// Sums the outputs over time, decrypts once and returns the winning class.
pub fn decode_output<B: HeBackend>(b: &B, outputs: &[Cv<B>], classes: usize) -> Result<usize> {
    let total = sum_outputs(b, outputs)?;
    let values = b.decrypt(&total)?;
    argmax(&values, classes).ok_or_else(|| Error::PlannerContract("no class slots".into()))
}

#[cfg(test)]
mod tests {
    use alloc::vec;
    use std::sync::OnceLock;

    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use super::*;
    use crate::approx::dead_zone;
    use crate::backend::{CkksBackend, SimBackend, SimConfig};
    use crate::ckks::{keygen, CkksContext, CkksParams};
    use crate::ring::unit_f64;

    fn sim(slots: usize, depth: usize) -> SimBackend {
        SimBackend::new(SimConfig::new(slots, depth)).unwrap()
    }

    fn ckks() -> &'static CkksBackend {
        static B: OnceLock<CkksBackend> = OnceLock::new();
        B.get_or_init(|| {
            let ctx = CkksContext::new(CkksParams::test().unwrap());
            let keys = keygen(ctx.params(), &[], &mut ChaCha20Rng::seed_from_u64(21)).unwrap();
            CkksBackend::with_keys(ctx, keys, [2; 32])
        })
    }

    fn switch_cfg() -> LifConfig {
        LifConfig::new(LifMode::Switch, 1.0)
    }

    #[test]
    fn plain_reference_examples() {
        let cfg = switch_cfg();
        let (s, v) = lif_plain_step(&[], &[0.0; 4], 1, &cfg);
        assert_eq!((s, v.clone()), (vec![0.0; 4], vec![0.0; 4]));
        let (s, v) = lif_plain_step(&v, &[0.0; 4], 2, &cfg);
        assert_eq!((s, v), (vec![0.0; 4], vec![0.0; 4]));

        let (s, v) = lif_plain_step(&[], &[0.6], 1, &cfg);
        assert_eq!((s[0], v[0]), (1.0, 0.0));
        let (s, v) = lif_plain_step(&v, &[0.1], 2, &cfg);
        assert_eq!(s[0], 0.0);
        assert!((v[0] - 0.1).abs() < 1e-15);

        let (s, _) = lif_plain_step(&[], &[0.5 + 1e-9, 0.5], 1, &cfg);
        assert_eq!(s, [1.0, 0.0]);
    }

    #[test]
    fn leak_carries_subthreshold_potential() {
        let cfg = switch_cfg();
        let (_, v) = lif_plain_step(&[], &[0.4], 1, &cfg);
        let (s, v) = lif_plain_step(&v, &[0.35], 2, &cfg);
        assert_eq!(s[0], 0.0);
        assert!((v[0] - 0.45).abs() < 1e-15);
        let (s, v) = lif_plain_step(&v, &[0.39], 3, &cfg);
        assert_eq!((s[0], v[0]), (1.0, 0.0));
    }

    #[test]
    fn config_validation() {
        let mut c = LifConfig::new(LifMode::Approx, 0.4);
        assert!(c.validate().is_err());
        c.scale_value = 2.0;
        assert!(c.validate().is_ok());
        c.tau = 1.0;
        assert!(c.validate().is_err());
        assert_eq!(LifConfig::new(LifMode::Approx, 4.0).step_depth(3), 9);
        assert_eq!(switch_cfg().step_depth(1), 1);
        assert_eq!(switch_cfg().step_depth(2), 2);
        assert_eq!("switch".parse::<LifMode>().unwrap(), LifMode::Switch);
        assert!("sigmoid".parse::<LifMode>().is_err());
    }

    #[test]
    fn switch_constant_examples() {
        let b = sim(8, 6);
        let cfg = switch_cfg();
        let th = b.encrypt(&[0.5; 8], 6).unwrap();
        let i = b.encrypt(&[0.4; 8], 6).unwrap();
        let (s, v) = lif_switch_step(&b, None, &i, &th, 1, &cfg).unwrap();
        assert_eq!(b.decrypt(&s).unwrap(), [0.0; 8]);
        assert_eq!(b.decrypt(&v).unwrap(), [0.4; 8]);
        let i = b.encrypt(&[0.6; 8], 6).unwrap();
        let (s, v) = lif_switch_step(&b, None, &i, &th, 1, &cfg).unwrap();
        assert_eq!(b.decrypt(&s).unwrap(), [1.0; 8]);
        assert_eq!(b.decrypt(&v).unwrap(), [0.0; 8]);
        assert_eq!(s.level(), 6);
        assert_eq!(v.level(), 5);
    }

    fn random_trace(rng: &mut ChaCha20Rng, steps: usize, n: usize) -> Vec<Vec<f64>> {
        (0..steps).map(|_| (0..n).map(|_| 1.2 * unit_f64(rng) - 0.3).collect()).collect()
    }

    fn plain_trace(trace: &[Vec<f64>], cfg: &LifConfig) -> Vec<Vec<f64>> {
        let mut v = Vec::new();
        trace
            .iter()
            .enumerate()
            .map(|(k, i)| {
                let (s, nv) = lif_plain_step(&v, i, k + 1, cfg);
                v = nv;
                s
            })
            .collect()
    }

    fn run_encrypted<B: HeBackend>(b: &B, ev: &LifEvaluator, trace: &[Vec<f64>], mask: Option<&[f64]>) -> Vec<Vec<f64>> {
        let th = b.encrypt_fresh(&vec![ev.config().threshold; b.slots()]).unwrap();
        let mut state = Membrane::new();
        trace
            .iter()
            .map(|i| {
                if let Some(l) = state.level() {
                    if l < ev.config().step_depth(state.next_t()) {
                        let r = b.refresh(state.potential().unwrap()).unwrap();
                        state.set_potential(r);
                    }
                }
                let ic = b.encrypt_fresh(i).unwrap();
                let s = ev.step(b, &mut state, &ic, Some(&th), mask).unwrap();
                b.decrypt(&s).unwrap()[..i.len()].to_vec()
            })
            .collect()
    }

    #[test]
    fn switch_is_exact_on_sim() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let b = sim(512, 3);
        let ev = LifEvaluator::new(switch_cfg()).unwrap();
        for _ in 0..4 {
            let trace = random_trace(&mut rng, 5, 512);
            assert_eq!(run_encrypted(&b, &ev, &trace, None), plain_trace(&trace, ev.config()));
        }
    }

    #[test]
    fn switch_matches_after_rounding_on_ckks() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let b = ckks();
        let ev = LifEvaluator::new(switch_cfg()).unwrap();
        let trace = random_trace(&mut rng, 5, 512);
        let got: Vec<Vec<f64>> = run_encrypted(b, &ev, &trace, None)
            .into_iter()
            .map(|s| s.into_iter().map(libm::round).collect())
            .collect();
        assert_eq!(got, plain_trace(&trace, ev.config()));
    }

    #[test]
    fn approx_far_below_threshold_is_silent() {
        let b = sim(64, 9);
        let cfg = LifConfig::new(LifMode::Approx, 2.0);
        let ev = LifEvaluator::new(cfg).unwrap();
        let i = b.encrypt(&[-0.5; 64], 9).unwrap();
        let mut state = Membrane::new();
        let s = ev.step(&b, &mut state, &i, None, None).unwrap();
        assert!(b.decrypt(&s).unwrap().iter().all(|x| x.abs() < 0.05));
        let v = b.decrypt(state.potential().unwrap()).unwrap();
        assert!(v.iter().all(|x| (x * 2.0 + 0.5).abs() < 0.05));
        assert_eq!(state.potential().unwrap().tag(), ScaleTag::Scaled(2.0));
        assert_eq!(state.level(), Some(0));
        assert_eq!(s.level(), 1);
    }

    #[test]
    fn approx_consumes_nine_levels() {
        let b = sim(16, 12);
        let cfg = LifConfig::new(LifMode::Approx, 2.0);
        let series = cfg.series().unwrap();
        let i = b.encrypt(&[0.3; 16], 12).unwrap();
        let (s, v) = lif_approx_step(&b, None, &i, 1, &cfg, &series, None).unwrap();
        assert_eq!((s.level(), v.level()), (12 - 8, 12 - 9));
        let i = b.encrypt(&[0.3; 16], 10).unwrap();
        let v = b.refresh(&v).unwrap();
        let (_, v2) = lif_approx_step(&b, Some(&v), &i, 2, &cfg, &series, None).unwrap();
        assert_eq!(v2.level(), 10 - 9);
        let low = b.encrypt(&[0.3; 16], 8).unwrap();
        assert!(matches!(
            lif_approx_step(&b, None, &low, 1, &cfg, &series, None),
            Err(Error::LevelExhausted { .. })
        ));
    }

    #[test]
    fn approx_rejects_mixed_domains() {
        let b = sim(16, 12);
        let cfg = LifConfig::new(LifMode::Approx, 2.0);
        let series = cfg.series().unwrap();
        let i = b.encrypt(&[0.3; 16], 12).unwrap();
        let natural_v = b.encrypt(&[0.3; 16], 12).unwrap();
        assert!(matches!(
            lif_approx_step(&b, Some(&natural_v), &i, 2, &cfg, &series, None),
            Err(Error::DomainMismatch(_))
        ));
        let scaled_i = i.clone().with_tag(ScaleTag::Scaled(2.0));
        assert!(matches!(
            lif_approx_step(&b, None, &scaled_i, 1, &cfg, &series, None),
            Err(Error::DomainMismatch(_))
        ));
    }

    /// Agreement with the plaintext reference on slots whose plaintext
    /// membrane lies outside the measured dead zone.
    #[test]
    fn approx_agrees_off_dead_zone() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let b = sim(512, 12);
        let cfg = LifConfig::new(LifMode::Approx, 1.5);
        let ev = LifEvaluator::new(cfg).unwrap();
        let delta = dead_zone(ev.series().unwrap()).half_width;
        assert!(delta <= 0.06);
        let (mut agree, mut counted) = (0usize, 0usize);
        for _ in 0..4 {
            let trace = random_trace(&mut rng, 5, 512);
            let got = run_encrypted(&b, &ev, &trace, None);
            let mut v = Vec::new();
            for (k, i) in trace.iter().enumerate() {
                let u: Vec<f64> = if k == 0 { i.clone() } else { i.iter().zip(&v).map(|(i, v)| cfg.tau * v + i).collect() };
                let (s, nv) = lif_plain_step(&v, i, k + 1, &cfg);
                for slot in 0..i.len() {
                    if (u[slot] / cfg.scale_value - cfg.scaled_threshold()).abs() > delta {
                        counted += 1;
                        agree += usize::from(libm::round(got[k][slot]) == s[slot]);
                    }
                }
                v = nv;
            }
        }
        assert!(agree as f64 >= 0.99 * counted as f64, "{agree}/{counted}");
    }

    #[test]
    fn approx_mask_keeps_padding_zero() {
        let b = sim(16, 12);
        let ev = LifEvaluator::new(LifConfig::new(LifMode::Approx, 2.0)).unwrap();
        let mask = [1.0, 1.0, 0.0, 0.0];
        let i = b.encrypt(&[0.9, 0.1], 12).unwrap();
        let mut state = Membrane::new();
        let s = b.decrypt(&ev.step(&b, &mut state, &i, None, Some(&mask)).unwrap()).unwrap();
        assert!((s[0] - 1.0).abs() < 0.05 && s[1].abs() < 0.05);
        assert!(s[2..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn decode_examples() {
        let b = sim(4, 2);
        let one = b.encrypt(&[0.1, 0.7, 0.2], 2).unwrap();
        assert_eq!(decode_output(&b, &[one], 3).unwrap(), 1);
        let a = b.encrypt(&[1.0, 0.0, 0.0], 2).unwrap();
        let c = b.encrypt(&[0.0, 3.0, 0.0], 2).unwrap();
        assert_eq!(decode_output(&b, &[a, c], 3).unwrap(), 1);
        assert!(matches!(decode_output(&b, &[], 3), Err(Error::PlannerContract(_))));
        assert_eq!(argmax(&[2.0, 2.0, 1.0], 3), Some(0));
        assert_eq!(argmax(&[0.0, 1.0, 5.0], 2), Some(1));
    }
}
