use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::eval::{Ciphertext, CkksContext};
use super::keys::{PublicKey, SecretKey};
use crate::error::{Error, Result};

/// Test-mode stand-in for bootstrapping and scheme switching.
///
/// Holds the secret key: it decrypts, acts on the plaintext slots and
/// re-encrypts at the top level. This restores the level budget and
/// models a comparison returning fresh from a Boolean-circuit scheme, but
/// it is not a secure protocol. Every use is counted so callers can log it.
///
/// Encryption randomness comes from ChaCha20 keyed by the authority seed,
/// one stream per call, so a fixed call order yields identical ciphertexts.
#[derive(Debug)]
pub struct RecryptionAuthority {
    ctx: CkksContext,
    sk: SecretKey,
    pk: PublicKey,
    seed: [u8; 32],
    draws: AtomicU64,
    refreshes: AtomicU64,
    switches: AtomicU64,
}

impl RecryptionAuthority {
    pub fn new(ctx: CkksContext, sk: SecretKey, pk: PublicKey, seed: [u8; 32]) -> Self {
        RecryptionAuthority {
            ctx,
            sk,
            pk,
            seed,
            draws: AtomicU64::new(0),
            refreshes: AtomicU64::new(0),
            switches: AtomicU64::new(0),
        }
    }

    fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::from_seed(self.seed);
        rng.set_stream(self.draws.fetch_add(1, Ordering::Relaxed));
        rng
    }

    fn reencrypt(&self, values: &[f64]) -> Result<Ciphertext> {
        let depth = self.ctx.params().depth();
        self.ctx.encrypt_values(values, depth, &self.pk, &mut self.rng())
    }

    /// Same slot values at the maximum level.
    pub fn refresh(&self, ct: &Ciphertext) -> Result<Ciphertext> {
        self.refreshes.fetch_add(1, Ordering::Relaxed);
        let values = self.ctx.decrypt_values(ct, &self.sk)?;
        self.reencrypt(&values)
    }

    /// Fresh encryption of `c_i = 1` if `values_i ≤ thresholds_i`, else `0`.
    pub fn compare(&self, values: &Ciphertext, thresholds: &Ciphertext) -> Result<Ciphertext> {
        self.switches.fetch_add(1, Ordering::Relaxed);
        let v = self.ctx.decrypt_values(values, &self.sk)?;
        let t = self.ctx.decrypt_values(thresholds, &self.sk)?;
        if v.len() != t.len() {
            return Err(Error::Structural("comparison operands differ in slot count".into()));
        }
        let c: Vec<f64> = v
            .iter()
            .zip(&t)
            .map(|(a, b)| if a <= b { 1.0 } else { 0.0 })
            .collect();
        self.reencrypt(&c)
    }

    /// Decrypted slot values (the harness holds the key).
    pub fn reveal(&self, ct: &Ciphertext) -> Result<Vec<f64>> {
        self.ctx.decrypt_values(ct, &self.sk)
    }

    pub fn refresh_count(&self) -> u64 {
        self.refreshes.load(Ordering::Relaxed)
    }

    pub fn switch_count(&self) -> u64 {
        self.switches.load(Ordering::Relaxed)
    }

    pub fn context(&self) -> &CkksContext {
        &self.ctx
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.pk
    }
}

#[cfg(test)]
mod tests {
    use super::super::keys::keygen;
    use super::super::params::CkksParams;
    use super::*;

    #[test]
    fn refresh_restores_level_and_values() {
        let ctx = CkksContext::new(CkksParams::test().unwrap());
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let keys = keygen(ctx.params(), &[], &mut rng).unwrap();
        let auth = RecryptionAuthority::new(ctx.clone(), keys.secret.clone(), keys.public.clone(), [7; 32]);
        let v: Vec<f64> = (0..ctx.slots()).map(|i| ((i * 37) % 101) as f64 / 101.0 - 0.5).collect();
        let fresh = ctx.encrypt_values(&v, 9, &keys.public, &mut rng).unwrap();
        let r = auth.refresh(&fresh).unwrap();
        assert_eq!(r.level(), 9);
        let d = ctx.decrypt_values(&r, &keys.secret).unwrap();
        assert!(v.iter().zip(&d).all(|(a, b)| (a - b).abs() < 1e-6));

        // after a chain of seven multiplications
        let mut ct = fresh.clone();
        let mut want = v.clone();
        for _ in 0..7 {
            ct = ctx.mul(&ct, &fresh, &keys.relin).unwrap();
            want.iter_mut().zip(&v).for_each(|(w, x)| *w *= x);
        }
        let r = auth.refresh(&ct).unwrap();
        let rr = auth.refresh(&r).unwrap();
        assert_eq!((r.level(), rr.level()), (9, 9));
        for d in [ctx.decrypt_values(&r, &keys.secret).unwrap(), ctx.decrypt_values(&rr, &keys.secret).unwrap()] {
            assert!(want.iter().zip(&d).all(|(a, b)| (a - b).abs() < 1e-3));
        }
        assert_eq!(auth.refresh_count(), 3);
    }
}
