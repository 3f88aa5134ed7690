use alloc::sync::Arc;
use alloc::vec::Vec;

use rand_core::RngCore;
use sha2::{Digest, Sha256};

use super::encoding::{Encoder, Plaintext};
use super::keys::{galois_element, normalize_rotation, GaloisKeySet, PublicKey, RelinKey, SecretKey};
use super::keyswitch::key_switch;
use super::params::{CkksParams, ERROR_STDDEV};
use crate::error::{Error, Result};
use crate::ring::{sample_gaussian, sample_ternary, Domain, RingPoly};

/// RLWE ciphertext `(c0, c1)` with `c0 + c1·s ≈ Δ·m`, NTT domain over
/// `q_0..=q_level`. `scale` always equals the canonical scale of `level`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ciphertext {
    pub(crate) c0: RingPoly,
    pub(crate) c1: RingPoly,
    pub(crate) level: usize,
    pub(crate) scale: f64,
}

impl Ciphertext {
    pub fn level(&self) -> usize {
        self.level
    }
    pub fn scale(&self) -> f64 {
        self.scale
    }
    pub fn c0(&self) -> &RingPoly {
        &self.c0
    }
    pub fn c1(&self) -> &RingPoly {
        &self.c1
    }

    /// SHA-256 over level, scale and every residue.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.level as u64).to_le_bytes());
        h.update(self.scale.to_bits().to_le_bytes());
        for p in [&self.c0, &self.c1] {
            for limb in p.limbs() {
                for c in limb {
                    h.update(c.to_le_bytes());
                }
            }
        }
        h.finalize().into()
    }

    /// Serialized size of the residues in bytes.
    pub fn byte_size(&self) -> usize {
        2 * (self.level + 1) * self.c0.n() * 8
    }
}

/// Parameters plus encoder; the entry point for every homomorphic operation.
#[derive(Debug, Clone)]
pub struct CkksContext {
    params: Arc<CkksParams>,
    encoder: Arc<Encoder>,
}

impl CkksContext {
    pub fn new(params: CkksParams) -> Self {
        let encoder = Encoder::new(params.n());
        CkksContext {
            params: Arc::new(params),
            encoder: Arc::new(encoder),
        }
    }

    pub fn params(&self) -> &CkksParams {
        &self.params
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn slots(&self) -> usize {
        self.params.slots()
    }

    pub fn encode(&self, values: &[f64], level: usize) -> Result<Plaintext> {
        self.encoder.encode(&self.params, values, level)
    }

    pub fn decode(&self, pt: &Plaintext) -> Vec<f64> {
        self.encoder.decode(pt)
    }

    /// Public-key encryption `(v·b + e0 + m, v·a + e1)`.
    pub fn encrypt<R: RngCore + ?Sized>(&self, pt: &Plaintext, pk: &PublicKey, rng: &mut R) -> Result<Ciphertext> {
        if pt.level > self.params.depth() {
            return Err(Error::Structural(alloc::format!(
                "plaintext level {} above depth {}",
                pt.level,
                self.params.depth()
            )));
        }
        let basis = self.params.basis_at(pt.level);
        let mut v = sample_ternary(&basis, rng);
        v.to_ntt()?;
        let mut e0 = sample_gaussian(&basis, ERROR_STDDEV, rng);
        e0.to_ntt()?;
        let mut e1 = sample_gaussian(&basis, ERROR_STDDEV, rng);
        e1.to_ntt()?;
        let b = pk.b.truncate(pt.level + 1)?;
        let a = pk.a.truncate(pt.level + 1)?;
        let c0 = v.mul(&b)?.add(&e0)?.add(&pt.poly)?;
        let c1 = v.mul(&a)?.add(&e1)?;
        Ok(Ciphertext {
            c0,
            c1,
            level: pt.level,
            scale: pt.scale,
        })
    }

    pub fn encrypt_values<R: RngCore + ?Sized>(
        &self,
        values: &[f64],
        level: usize,
        pk: &PublicKey,
        rng: &mut R,
    ) -> Result<Ciphertext> {
        self.encrypt(&self.encode(values, level)?, pk, rng)
    }

    /// `c0 + c1·s` at the ciphertext's level.
    pub fn decrypt(&self, ct: &Ciphertext, sk: &SecretKey) -> Result<Plaintext> {
        let s = sk.s.truncate(ct.level + 1)?;
        let poly = ct.c0.add(&ct.c1.mul(&s)?)?;
        Ok(Plaintext {
            poly,
            scale: ct.scale,
            level: ct.level,
        })
    }

    pub fn decrypt_values(&self, ct: &Ciphertext, sk: &SecretKey) -> Result<Vec<f64>> {
        Ok(self.decode(&self.decrypt(ct, sk)?))
    }

    fn require_level(op: &'static str, ct: &Ciphertext, required: usize) -> Result<()> {
        if ct.level < required {
            return Err(Error::LevelExhausted {
                op,
                required,
                available: ct.level,
            });
        }
        Ok(())
    }

    /// Divides by `q_level` and moves to the canonical scale of `level - 1`.
    pub fn rescale(&self, ct: &Ciphertext) -> Result<Ciphertext> {
        Self::require_level("rescale", ct, 1)?;
        let q = self.params.q_basis().modulus(ct.level).value() as f64;
        Ok(Ciphertext {
            c0: ct.c0.rns_drop_last()?,
            c1: ct.c1.rns_drop_last()?,
            level: ct.level - 1,
            scale: ct.scale * self.params.scale_at(ct.level) / q,
        })
    }

    /// Multiplies by the integer nearest `c·Δ_level` and rescales.
    pub fn mul_const(&self, ct: &Ciphertext, c: f64) -> Result<Ciphertext> {
        Self::require_level("mul_const", ct, 1)?;
        if !c.is_finite() {
            return Err(Error::Domain(alloc::format!("constant {c} is not finite")));
        }
        let k = libm::round(c * self.params.scale_at(ct.level)) as i128;
        let scaled = Ciphertext {
            c0: ct.c0.mul_scalar(k),
            c1: ct.c1.mul_scalar(k),
            ..ct.clone()
        };
        self.rescale(&scaled)
    }

    /// Lowers `ct` to `target` by repeated multiplication with 1.
    pub fn level_down(&self, ct: &Ciphertext, target: usize) -> Result<Ciphertext> {
        if target > ct.level {
            return Err(Error::Structural(alloc::format!(
                "cannot raise level {} to {target} without refresh",
                ct.level
            )));
        }
        let mut out = ct.clone();
        while out.level > target {
            out = self.mul_const(&out, 1.0)?;
        }
        Ok(out)
    }

    fn aligned(&self, a: &Ciphertext, b: &Ciphertext) -> Result<(Ciphertext, Ciphertext)> {
        let l = a.level.min(b.level);
        Ok((self.level_down(a, l)?, self.level_down(b, l)?))
    }

    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        let (a, b) = self.aligned(a, b)?;
        Ok(Ciphertext {
            c0: a.c0.add(&b.c0)?,
            c1: a.c1.add(&b.c1)?,
            ..a
        })
    }

    pub fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        let (a, b) = self.aligned(a, b)?;
        Ok(Ciphertext {
            c0: a.c0.sub(&b.c0)?,
            c1: a.c1.sub(&b.c1)?,
            ..a
        })
    }

    pub fn negate(&self, ct: &Ciphertext) -> Ciphertext {
        Ciphertext {
            c0: ct.c0.neg(),
            c1: ct.c1.neg(),
            ..ct.clone()
        }
    }

    /// Adds a plaintext encoded at the ciphertext's level and scale.
    pub fn add_plain(&self, ct: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
        self.check_plain(ct, pt)?;
        Ok(Ciphertext {
            c0: ct.c0.add(&pt.poly)?,
            ..ct.clone()
        })
    }

    pub fn add_plain_values(&self, ct: &Ciphertext, values: &[f64]) -> Result<Ciphertext> {
        let pt = self.encode(values, ct.level)?;
        self.add_plain(ct, &pt)
    }

    /// Adds `c` to every slot (a constant polynomial).
    pub fn add_const(&self, ct: &Ciphertext, c: f64) -> Result<Ciphertext> {
        let k = libm::round(c * ct.scale) as i128;
        let mut c0 = ct.c0.clone();
        let basis = c0.basis().clone();
        for (i, limb) in c0.limbs_mut().iter_mut().enumerate() {
            let m = basis.modulus(i);
            let r = m.reduce_i128(k);
            for x in limb.iter_mut() {
                *x = m.add(*x, r);
            }
        }
        Ok(Ciphertext { c0, ..ct.clone() })
    }

    fn check_plain(&self, ct: &Ciphertext, pt: &Plaintext) -> Result<()> {
        if pt.level != ct.level {
            return Err(Error::Structural(alloc::format!(
                "plaintext at level {} used with ciphertext at level {}",
                pt.level,
                ct.level
            )));
        }
        Ok(())
    }

    /// Slot-wise product with a plaintext encoded at `ct.level`, then rescale.
    pub fn mul_plain(&self, ct: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
        self.rescale(&self.mul_plain_unrescaled(ct, pt)?)
    }

    /// The product of [`mul_plain`](Self::mul_plain) before its rescale.
    /// Sums of such products at one level share a single [`rescale`](Self::rescale).
    pub fn mul_plain_unrescaled(&self, ct: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
        Self::require_level("mul_plain", ct, 1)?;
        self.check_plain(ct, pt)?;
        Ok(Ciphertext {
            c0: ct.c0.mul(&pt.poly)?,
            c1: ct.c1.mul(&pt.poly)?,
            level: ct.level,
            scale: ct.scale * pt.scale / self.params.scale_at(ct.level),
        })
    }

    pub fn mul_plain_values(&self, ct: &Ciphertext, values: &[f64]) -> Result<Ciphertext> {
        Self::require_level("mul_plain", ct, 1)?;
        let pt = self.encode(values, ct.level)?;
        self.mul_plain(ct, &pt)
    }

    /// Relinearized, rescaled product of two ciphertexts.
    pub fn mul(&self, a: &Ciphertext, b: &Ciphertext, rlk: &RelinKey) -> Result<Ciphertext> {
        let (a, b) = self.aligned(a, b)?;
        Self::require_level("he_mul", &a, 1)?;
        let d0 = a.c0.mul(&b.c0)?;
        let d1 = a.c0.mul(&b.c1)?.add(&a.c1.mul(&b.c0)?)?;
        let d2 = a.c1.mul(&b.c1)?;
        let (k0, k1) = key_switch(&self.params, &rlk.0, &d2.ntt_inverse()?, &d2, a.level);
        let prod = Ciphertext {
            c0: d0.add(&k0)?,
            c1: d1.add(&k1)?,
            level: a.level,
            scale: a.scale * b.scale / self.params.scale_at(a.level),
        };
        self.rescale(&prod)
    }

    pub fn square(&self, a: &Ciphertext, rlk: &RelinKey) -> Result<Ciphertext> {
        self.mul(a, a, rlk)
    }

    /// Left rotation: slot `i` receives slot `(i + k) mod slots`.
    pub fn rotate(&self, ct: &Ciphertext, k: i64, gks: &GaloisKeySet) -> Result<Ciphertext> {
        let r = normalize_rotation(k, self.slots());
        if r == 0 {
            return Ok(ct.clone());
        }
        let key = gks.get(r).ok_or(Error::MissingKey(k))?;
        debug_assert_eq!(key.galois, galois_element(r, self.params.n()));
        let c0 = ct.c0.automorphism(key.galois)?;
        let c1 = ct.c1.automorphism(key.galois)?;
        let (k0, k1) = key_switch(&self.params, &key.ksk, &c1.ntt_inverse()?, &c1, ct.level);
        Ok(Ciphertext {
            c0: c0.add(&k0)?,
            c1: k1,
            level: ct.level,
            scale: ct.scale,
        })
    }

    /// Encryption of zero-noise zero at `level`, useful as an accumulator seed.
    pub fn zero(&self, level: usize) -> Ciphertext {
        let basis = self.params.basis_at(level);
        Ciphertext {
            c0: RingPoly::zero(&basis, Domain::Ntt),
            c1: RingPoly::zero(&basis, Domain::Ntt),
            level,
            scale: self.params.scale_at(level),
        }
    }
}
