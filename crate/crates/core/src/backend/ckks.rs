use alloc::sync::Arc;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{check_values, require_level, BackendKind, CipherVector, Cv, HeBackend, Meter, ScaleTag};
use crate::ckks::{Ciphertext, CkksContext, GaloisKeySet, KeySet, Plaintext, PublicKey, RecryptionAuthority, RelinKey};
use crate::error::{Error, Result};

/// [`HeBackend`] over the RNS-CKKS scheme.
///
/// Built with [`CkksBackend::with_keys`] it plays the harness role: it can
/// decrypt and owns a [`RecryptionAuthority`] for refresh and comparison.
/// Built with [`CkksBackend::evaluator`] it holds public material only.
#[derive(Debug)]
pub struct CkksBackend {
    ctx: CkksContext,
    public: PublicKey,
    relin: Option<RelinKey>,
    galois: GaloisKeySet,
    authority: Option<Arc<RecryptionAuthority>>,
    seed: [u8; 32],
    draws: AtomicU64,
    meter: Meter,
}

impl CkksBackend {
    pub fn with_keys(ctx: CkksContext, keys: KeySet, seed: [u8; 32]) -> Self {
        let mut auth_seed = seed;
        auth_seed[31] ^= 0xa5;
        let authority = RecryptionAuthority::new(ctx.clone(), keys.secret, keys.public.clone(), auth_seed);
        CkksBackend {
            ctx,
            public: keys.public,
            relin: Some(keys.relin),
            galois: keys.galois,
            authority: Some(Arc::new(authority)),
            seed,
            draws: AtomicU64::new(0),
            meter: Meter::default(),
        }
    }

    pub fn evaluator(
        ctx: CkksContext,
        public: PublicKey,
        relin: Option<RelinKey>,
        galois: GaloisKeySet,
        seed: [u8; 32],
    ) -> Self {
        CkksBackend {
            ctx,
            public,
            relin,
            galois,
            authority: None,
            seed,
            draws: AtomicU64::new(0),
            meter: Meter::default(),
        }
    }

    pub fn context(&self) -> &CkksContext {
        &self.ctx
    }

    pub fn galois_keys(&self) -> &GaloisKeySet {
        &self.galois
    }

    pub fn authority(&self) -> Option<&RecryptionAuthority> {
        self.authority.as_deref()
    }

    fn wrap(&self, ct: Ciphertext, tag: ScaleTag) -> Cv<Self> {
        let level = ct.level();
        CipherVector::new(ct, self.ctx.slots(), level, tag)
    }
}

impl HeBackend for CkksBackend {
    type Payload = Ciphertext;
    type Plain = Plaintext;
    /// Unrescaled ciphertext and the tag of its terms.
    type Acc = (Ciphertext, ScaleTag);

    fn kind(&self) -> BackendKind {
        BackendKind::Ckks
    }
    fn slots(&self) -> usize {
        self.ctx.slots()
    }
    fn depth(&self) -> usize {
        self.ctx.params().depth()
    }
    fn meter(&self) -> &Meter {
        &self.meter
    }

    fn encrypt(&self, values: &[f64], level: usize) -> Result<Cv<Self>> {
        self.meter.encrypt();
        check_values(values, self.slots())?;
        let mut rng = ChaCha20Rng::from_seed(self.seed);
        rng.set_stream(self.draws.fetch_add(1, Ordering::Relaxed));
        let ct = self.ctx.encrypt_values(values, level, &self.public, &mut rng)?;
        Ok(self.wrap(ct, ScaleTag::Natural))
    }

    fn decrypt(&self, cv: &Cv<Self>) -> Result<Vec<f64>> {
        self.meter.decrypt();
        self.authority.as_ref().ok_or(Error::MissingSecretKey)?.reveal(cv.payload())
    }

    fn encode(&self, values: &[f64], level: usize) -> Result<Plaintext> {
        self.meter.encode();
        check_values(values, self.slots())?;
        self.ctx.encode(values, level)
    }

    fn plain_level(&self, pt: &Plaintext) -> usize {
        pt.level()
    }

    fn zero(&self, level: usize) -> Cv<Self> {
        self.wrap(self.ctx.zero(level), ScaleTag::Natural)
    }

    fn add(&self, a: &Cv<Self>, b: &Cv<Self>) -> Result<Cv<Self>> {
        self.meter.add();
        let tag = a.tag().sum(b.tag())?;
        Ok(self.wrap(self.ctx.add(a.payload(), b.payload())?, tag))
    }

    fn sub(&self, a: &Cv<Self>, b: &Cv<Self>) -> Result<Cv<Self>> {
        self.meter.add();
        let tag = a.tag().sum(b.tag())?;
        Ok(self.wrap(self.ctx.sub(a.payload(), b.payload())?, tag))
    }

    fn negate(&self, a: &Cv<Self>) -> Cv<Self> {
        self.wrap(self.ctx.negate(a.payload()), a.tag())
    }

    fn add_plain(&self, a: &Cv<Self>, pt: &Plaintext) -> Result<Cv<Self>> {
        self.meter.add_plain();
        Ok(self.wrap(self.ctx.add_plain(a.payload(), pt)?, a.tag()))
    }

    fn add_const(&self, a: &Cv<Self>, c: f64) -> Result<Cv<Self>> {
        self.meter.add_plain();
        if !c.is_finite() {
            return Err(Error::Domain(alloc::format!("constant {c} is not finite")));
        }
        Ok(self.wrap(self.ctx.add_const(a.payload(), c)?, a.tag()))
    }

    fn mul_plain(&self, a: &Cv<Self>, pt: &Plaintext) -> Result<Cv<Self>> {
        self.meter.mul_plain();
        Ok(self.wrap(self.ctx.mul_plain(a.payload(), pt)?, a.tag()))
    }

    fn mul_acc(&self, acc: Option<Self::Acc>, a: &Cv<Self>, values: &[f64]) -> Result<Self::Acc> {
        require_level("mul_plain", a.level(), 1)?;
        let pt = self.encode(values, a.level())?;
        self.meter.mul_plain();
        let p = self.ctx.mul_plain_unrescaled(a.payload(), &pt)?;
        match acc {
            None => Ok((p, a.tag())),
            Some((s, tag)) => {
                self.meter.add();
                if s.level() != p.level() {
                    return Err(Error::Structural(alloc::format!(
                        "accumulator at level {} given a term at level {}",
                        s.level(),
                        p.level()
                    )));
                }
                Ok((self.ctx.add(&s, &p)?, tag.sum(a.tag())?))
            }
        }
    }

    fn finish_acc(&self, (acc, tag): Self::Acc) -> Result<Cv<Self>> {
        Ok(self.wrap(self.ctx.rescale(&acc)?, tag))
    }

    fn mul_const(&self, a: &Cv<Self>, c: f64) -> Result<Cv<Self>> {
        self.meter.mul_const();
        Ok(self.wrap(self.ctx.mul_const(a.payload(), c)?, a.tag()))
    }

    fn mul(&self, a: &Cv<Self>, b: &Cv<Self>) -> Result<Cv<Self>> {
        self.meter.mul();
        let tag = a.tag().product(b.tag())?;
        require_level("he_mul", a.level().min(b.level()), 1)?;
        let rlk = self.relin.as_ref().ok_or(Error::MissingRelinKey)?;
        Ok(self.wrap(self.ctx.mul(a.payload(), b.payload(), rlk)?, tag))
    }

    fn rotate(&self, a: &Cv<Self>, k: i64) -> Result<Cv<Self>> {
        if crate::ckks::normalize_rotation(k, self.slots()) == 0 {
            return Ok(a.clone());
        }
        self.meter.rotate();
        Ok(self.wrap(self.ctx.rotate(a.payload(), k, &self.galois)?, a.tag()))
    }

    fn has_rotation(&self, k: i64) -> bool {
        let r = crate::ckks::normalize_rotation(k, self.slots());
        r == 0 || self.galois.contains(r)
    }

    fn level_down(&self, a: &Cv<Self>, level: usize) -> Result<Cv<Self>> {
        if level == a.level() {
            return Ok(a.clone());
        }
        self.meter.level_down();
        Ok(self.wrap(self.ctx.level_down(a.payload(), level)?, a.tag()))
    }

    fn refresh(&self, a: &Cv<Self>) -> Result<Cv<Self>> {
        let auth = self.authority.as_ref().ok_or(Error::RefreshUnavailable)?;
        self.meter.refresh();
        Ok(self.wrap(auth.refresh(a.payload())?, a.tag()))
    }

    fn exact_compare(&self, values: &Cv<Self>, thresholds: &Cv<Self>) -> Result<Cv<Self>> {
        let auth = self.authority.as_ref().ok_or(Error::CompareUnavailable)?;
        self.meter.compare();
        values.tag().sum(thresholds.tag())?;
        Ok(self.wrap(auth.compare(values.payload(), thresholds.payload())?, ScaleTag::Natural))
    }

    fn byte_size(&self, a: &Cv<Self>) -> usize {
        a.payload().byte_size()
    }

    fn digest(&self, a: &Cv<Self>) -> [u8; 32] {
        a.payload().digest()
    }
}
