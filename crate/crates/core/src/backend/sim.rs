use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{check_values, require_level, BackendKind, CipherVector, Cv, HeBackend, Meter, ScaleTag};
use crate::ckks::normalize_rotation;
use crate::error::{Error, Result};
use crate::ring::standard_normal;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub slots: usize,
    pub depth: usize,
    /// Standard deviation of Gaussian noise added to every slot after each
    /// arithmetic operation; 0 gives exact arithmetic.
    pub noise_stddev: f64,
    /// Rotation indices treated as having keys; `None` allows every rotation.
    pub rotation_keys: Option<BTreeSet<i64>>,
    /// Whether refresh and exact comparison are available.
    pub authority: bool,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(slots: usize, depth: usize) -> Self {
        SimConfig {
            slots,
            depth,
            noise_stddev: 0.0,
            rotation_keys: None,
            authority: true,
            seed: 0,
        }
    }
}

/// Plaintext for the simulator: values plus the level they were encoded at.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPlain {
    values: Vec<f64>,
    level: usize,
}

/// Slot-exact stand-in for CKKS with the same level ledger.
#[derive(Debug)]
pub struct SimBackend {
    cfg: SimConfig,
    draws: AtomicU64,
    meter: Meter,
}

impl SimBackend {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        if !cfg.slots.is_power_of_two() {
            return Err(Error::Parameter(alloc::format!("slot count {} is not a power of two", cfg.slots)));
        }
        if !(cfg.noise_stddev >= 0.0 && cfg.noise_stddev.is_finite()) {
            return Err(Error::Parameter(alloc::format!("noise stddev {} must be >= 0", cfg.noise_stddev)));
        }
        if let Some(keys) = &cfg.rotation_keys {
            let normalized = keys.iter().map(|&k| normalize_rotation(k, cfg.slots)).collect();
            return Ok(SimBackend {
                cfg: SimConfig {
                    rotation_keys: Some(normalized),
                    ..cfg
                },
                draws: AtomicU64::new(0),
                meter: Meter::default(),
            });
        }
        Ok(SimBackend {
            cfg,
            draws: AtomicU64::new(0),
            meter: Meter::default(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    fn perturb(&self, mut v: Vec<f64>) -> Vec<f64> {
        if self.cfg.noise_stddev > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
            rng.set_stream(self.draws.fetch_add(1, Ordering::Relaxed));
            for x in v.iter_mut() {
                *x += self.cfg.noise_stddev * standard_normal(&mut rng);
            }
        }
        v
    }

    fn padded(&self, values: &[f64]) -> Result<Vec<f64>> {
        check_values(values, self.cfg.slots)?;
        let mut v = vec![0.0; self.cfg.slots];
        v[..values.len()].copy_from_slice(values);
        Ok(v)
    }

    fn out(&self, v: Vec<f64>, level: usize, tag: ScaleTag) -> Cv<Self> {
        CipherVector::new(self.perturb(v), self.cfg.slots, level, tag)
    }

    fn zip(&self, a: &Cv<Self>, b: &Cv<Self>, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        a.payload().iter().zip(b.payload()).map(|(&x, &y)| f(x, y)).collect()
    }

    fn check_plain(&self, a: &Cv<Self>, pt: &SimPlain) -> Result<()> {
        if pt.level != a.level() {
            return Err(Error::Structural(alloc::format!(
                "plaintext at level {} used with ciphertext at level {}",
                pt.level,
                a.level()
            )));
        }
        Ok(())
    }
}

impl HeBackend for SimBackend {
    type Payload = Vec<f64>;
    type Plain = SimPlain;
    type Acc = Cv<Self>;

    fn kind(&self) -> BackendKind {
        BackendKind::Sim
    }
    fn slots(&self) -> usize {
        self.cfg.slots
    }
    fn depth(&self) -> usize {
        self.cfg.depth
    }
    fn meter(&self) -> &Meter {
        &self.meter
    }

    fn encrypt(&self, values: &[f64], level: usize) -> Result<Cv<Self>> {
        self.meter.encrypt();
        if level > self.cfg.depth {
            return Err(Error::Structural(alloc::format!("level {level} above depth {}", self.cfg.depth)));
        }
        let v = self.padded(values)?;
        Ok(self.out(v, level, ScaleTag::Natural))
    }

    fn decrypt(&self, cv: &Cv<Self>) -> Result<Vec<f64>> {
        self.meter.decrypt();
        Ok(cv.payload().clone())
    }

    fn encode(&self, values: &[f64], level: usize) -> Result<SimPlain> {
        self.meter.encode();
        Ok(SimPlain {
            values: self.padded(values)?,
            level,
        })
    }

    fn plain_level(&self, pt: &SimPlain) -> usize {
        pt.level
    }

    fn zero(&self, level: usize) -> Cv<Self> {
        CipherVector::new(vec![0.0; self.cfg.slots], self.cfg.slots, level, ScaleTag::Natural)
    }

    fn add(&self, a: &Cv<Self>, b: &Cv<Self>) -> Result<Cv<Self>> {
        self.meter.add();
        let tag = a.tag().sum(b.tag())?;
        Ok(self.out(self.zip(a, b, |x, y| x + y), a.level().min(b.level()), tag))
    }

    fn sub(&self, a: &Cv<Self>, b: &Cv<Self>) -> Result<Cv<Self>> {
        self.meter.add();
        let tag = a.tag().sum(b.tag())?;
        Ok(self.out(self.zip(a, b, |x, y| x - y), a.level().min(b.level()), tag))
    }

    fn negate(&self, a: &Cv<Self>) -> Cv<Self> {
        CipherVector::new(a.payload().iter().map(|x| -x).collect(), a.slots(), a.level(), a.tag())
    }

    fn add_plain(&self, a: &Cv<Self>, pt: &SimPlain) -> Result<Cv<Self>> {
        self.meter.add_plain();
        self.check_plain(a, pt)?;
        let v = a.payload().iter().zip(&pt.values).map(|(x, y)| x + y).collect();
        Ok(self.out(v, a.level(), a.tag()))
    }

    fn add_const(&self, a: &Cv<Self>, c: f64) -> Result<Cv<Self>> {
        self.meter.add_plain();
        Ok(self.out(a.payload().iter().map(|x| x + c).collect(), a.level(), a.tag()))
    }

    fn mul_plain(&self, a: &Cv<Self>, pt: &SimPlain) -> Result<Cv<Self>> {
        self.meter.mul_plain();
        require_level("mul_plain", a.level(), 1)?;
        self.check_plain(a, pt)?;
        let v = a.payload().iter().zip(&pt.values).map(|(x, y)| x * y).collect();
        Ok(self.out(v, a.level() - 1, a.tag()))
    }

    fn mul_acc(&self, acc: Option<Cv<Self>>, a: &Cv<Self>, values: &[f64]) -> Result<Cv<Self>> {
        let p = self.mul_values(a, values)?;
        match acc {
            None => Ok(p),
            Some(s) => self.add(&s, &p),
        }
    }

    fn finish_acc(&self, acc: Cv<Self>) -> Result<Cv<Self>> {
        Ok(acc)
    }

    fn mul_const(&self, a: &Cv<Self>, c: f64) -> Result<Cv<Self>> {
        self.meter.mul_const();
        require_level("mul_const", a.level(), 1)?;
        if !c.is_finite() {
            return Err(Error::Domain(alloc::format!("constant {c} is not finite")));
        }
        Ok(self.out(a.payload().iter().map(|x| x * c).collect(), a.level() - 1, a.tag()))
    }

    fn mul(&self, a: &Cv<Self>, b: &Cv<Self>) -> Result<Cv<Self>> {
        self.meter.mul();
        let tag = a.tag().product(b.tag())?;
        let level = a.level().min(b.level());
        require_level("he_mul", level, 1)?;
        Ok(self.out(self.zip(a, b, |x, y| x * y), level - 1, tag))
    }

    fn rotate(&self, a: &Cv<Self>, k: i64) -> Result<Cv<Self>> {
        let r = normalize_rotation(k, self.cfg.slots);
        if r == 0 {
            return Ok(a.clone());
        }
        self.meter.rotate();
        if !self.has_rotation(r) {
            return Err(Error::MissingKey(k));
        }
        let mut v = a.payload().clone();
        v.rotate_left(r.rem_euclid(self.cfg.slots as i64) as usize);
        Ok(self.out(v, a.level(), a.tag()))
    }

    fn has_rotation(&self, k: i64) -> bool {
        let r = normalize_rotation(k, self.cfg.slots);
        r == 0 || self.cfg.rotation_keys.as_ref().map_or(true, |keys| keys.contains(&r))
    }

    fn level_down(&self, a: &Cv<Self>, level: usize) -> Result<Cv<Self>> {
        if level > a.level() {
            return Err(Error::Structural(alloc::format!(
                "cannot raise level {} to {level} without refresh",
                a.level()
            )));
        }
        if level == a.level() {
            return Ok(a.clone());
        }
        self.meter.level_down();
        Ok(CipherVector::new(a.payload().clone(), a.slots(), level, a.tag()))
    }

    fn refresh(&self, a: &Cv<Self>) -> Result<Cv<Self>> {
        if !self.cfg.authority {
            return Err(Error::RefreshUnavailable);
        }
        self.meter.refresh();
        Ok(CipherVector::new(a.payload().clone(), a.slots(), self.cfg.depth, a.tag()))
    }

    fn exact_compare(&self, values: &Cv<Self>, thresholds: &Cv<Self>) -> Result<Cv<Self>> {
        if !self.cfg.authority {
            return Err(Error::CompareUnavailable);
        }
        self.meter.compare();
        values.tag().sum(thresholds.tag())?;
        let c = self.zip(values, thresholds, |v, t| if v <= t { 1.0 } else { 0.0 });
        Ok(CipherVector::new(c, self.cfg.slots, self.cfg.depth, ScaleTag::Natural))
    }

    fn byte_size(&self, a: &Cv<Self>) -> usize {
        a.slots() * 8
    }

    fn digest(&self, a: &Cv<Self>) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((a.level() as u64).to_le_bytes());
        for x in a.payload() {
            h.update(x.to_bits().to_le_bytes());
        }
        h.finalize().into()
    }
}
