use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{CkksParams, ERROR_STDDEV};
use crate::error::{Error, Result};
use crate::ring::{sample_gaussian, sample_ternary, sample_uniform, uniform_below, Domain, RingPoly};

/// Ternary secret `s`, stored in the NTT domain over `q ∪ P`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecretKey {
    pub(crate) s: RingPoly,
}

/// RLWE pair `(b, a)` with `b = -a·s + e`, NTT domain over the full `q` chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicKey {
    pub(crate) b: RingPoly,
    pub(crate) a: RingPoly,
}

/// Hybrid key-switching material from some `s'` to `s`.
///
/// Digit `j` is `(b_j, a_j)` over `q ∪ P` with
/// `b_j = -a_j·s + e_j + P·[i ∈ digit j]·s'` on each prime `q_i` and
/// `b_j = -a_j·s + e_j` on the special primes. The uniform `a_j` are
/// expanded from `seed` on demand and never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct KeySwitchKey {
    pub(crate) b: Vec<RingPoly>,
    pub(crate) seed: [u8; 32],
}

/// Key-switching material for `s^2 → s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelinKey(pub(crate) KeySwitchKey);

/// Key for one slot rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct GaloisKey {
    pub(crate) index: i64,
    pub(crate) galois: u64,
    pub(crate) ksk: KeySwitchKey,
}

impl GaloisKey {
    pub fn index(&self) -> i64 {
        self.index
    }
    pub fn galois_element(&self) -> u64 {
        self.galois
    }
}

/// Rotation keys indexed by normalized rotation amount.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GaloisKeySet {
    pub(crate) keys: BTreeMap<i64, GaloisKey>,
}

impl GaloisKeySet {
    pub fn len(&self) -> usize {
        self.keys.len()
    }
    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
    /// Sorted rotation indices covered by the set.
    pub fn indices(&self) -> Vec<i64> {
        self.keys.keys().copied().collect()
    }
    pub fn get(&self, index: i64) -> Option<&GaloisKey> {
        self.keys.get(&index)
    }
    pub fn contains(&self, index: i64) -> bool {
        self.keys.contains_key(&index)
    }
}

/// All key material produced by [`keygen`].
#[derive(Debug, Clone)]
pub struct KeySet {
    pub secret: SecretKey,
    pub public: PublicKey,
    pub relin: RelinKey,
    pub galois: GaloisKeySet,
}

/// Representative of `k mod slots` in `(-slots/2, slots/2]`.
pub fn normalize_rotation(k: i64, slots: usize) -> i64 {
    let s = slots as i64;
    let r = k.rem_euclid(s);
    if r > s / 2 {
        r - s
    } else {
        r
    }
}

/// Galois element `5^k mod 2N` realizing a left rotation by `k` slots.
pub fn galois_element(k: i64, n: usize) -> u64 {
    let slots = (n / 2) as i64;
    let e = k.rem_euclid(slots) as u64;
    crate::ring::pow_mod(5, e, 2 * n as u64)
}

/// Uniform limb `limb` of digit `digit` of a key seeded by `seed`.
pub(crate) fn expand_a(params: &CkksParams, seed: &[u8; 32], digit: usize, limb: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::from_seed(*seed);
    rng.set_stream((digit as u64) << 32 | limb as u64);
    let q = params.key_basis().modulus(limb).value();
    (0..params.n()).map(|_| uniform_below(&mut rng, q)).collect()
}

pub fn gen_secret_key<R: RngCore + ?Sized>(params: &CkksParams, rng: &mut R) -> SecretKey {
    let mut s = sample_ternary(params.key_basis(), rng);
    s.to_ntt().expect("fresh sample is in coefficient form");
    SecretKey { s }
}

pub fn gen_public_key<R: RngCore + ?Sized>(params: &CkksParams, sk: &SecretKey, rng: &mut R) -> PublicKey {
    let basis = params.q_basis();
    let a = sample_uniform(basis, Domain::Ntt, rng);
    let mut e = sample_gaussian(basis, ERROR_STDDEV, rng);
    e.to_ntt().expect("coefficient form");
    let s = sk.s.truncate(basis.len()).expect("key basis extends q");
    let b = e.sub(&a.mul(&s).expect("same basis")).expect("same basis");
    PublicKey { b, a }
}

/// Switching key from `s_prime` (NTT over `q ∪ P`) to the secret key.
pub(crate) fn gen_switch_key<R: RngCore + ?Sized>(
    params: &CkksParams,
    sk: &SecretKey,
    s_prime: &RingPoly,
    rng: &mut R,
) -> KeySwitchKey {
    let kb = params.key_basis();
    let depth = params.depth();
    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    let p_mod_q: Vec<u64> = (0..=depth)
        .map(|i| {
            let m = kb.modulus(i);
            params
                .p_basis()
                .moduli()
                .iter()
                .fold(1u64, |acc, p| m.mul(acc, m.reduce(p.value())))
        })
        .collect();
    let b = (0..params.dnum())
        .map(|j| {
            let digit = params.digit(j, depth);
            let mut e = sample_gaussian(kb, ERROR_STDDEV, rng);
            e.to_ntt().expect("coefficient form");
            let mut limbs = e.into_limbs();
            for (i, limb) in limbs.iter_mut().enumerate() {
                let m = kb.modulus(i);
                let a = expand_a(params, &seed, j, i);
                let s = sk.s.limb(i);
                let sp = s_prime.limb(i);
                let gadget = if digit.contains(&i) { p_mod_q[i] } else { 0 };
                for c in 0..limb.len() {
                    let mut v = m.sub(limb[c], m.mul(a[c], s[c]));
                    if gadget != 0 {
                        v = m.add(v, m.mul(gadget, sp[c]));
                    }
                    limb[c] = v;
                }
            }
            RingPoly::from_parts_unchecked(kb.clone(), limbs, Domain::Ntt)
        })
        .collect();
    KeySwitchKey { b, seed }
}

pub fn gen_relin_key<R: RngCore + ?Sized>(params: &CkksParams, sk: &SecretKey, rng: &mut R) -> RelinKey {
    let s2 = sk.s.mul(&sk.s).expect("same basis");
    RelinKey(gen_switch_key(params, sk, &s2, rng))
}

/// Rotation keys for every distinct index in `indices`.
///
/// Indices are validated against `(-slots, slots) \ {0}` and stored in
/// normalized form, so `k` and `k - slots` share one key.
pub fn gen_galois_keys<R: RngCore + ?Sized>(
    params: &CkksParams,
    sk: &SecretKey,
    indices: &[i64],
    rng: &mut R,
) -> Result<GaloisKeySet> {
    let slots = params.slots() as i64;
    let mut wanted = alloc::collections::BTreeSet::new();
    for &k in indices {
        if k == 0 || k <= -slots || k >= slots {
            return Err(Error::PlannerContract(alloc::format!(
                "rotation index {k} outside (-{slots}, {slots}) \\ {{0}}"
            )));
        }
        let r = normalize_rotation(k, params.slots());
        if r == 0 {
            return Err(Error::PlannerContract(alloc::format!(
                "rotation index {k} is the identity"
            )));
        }
        wanted.insert(r);
    }
    let mut s_coeff = sk.s.ntt_inverse().expect("ntt domain");
    let mut keys = BTreeMap::new();
    for k in wanted {
        let g = galois_element(k, params.n());
        let mut rotated = s_coeff.automorphism(g).expect("odd element");
        rotated.to_ntt().expect("coefficient form");
        let ksk = gen_switch_key(params, sk, &rotated, rng);
        keys.insert(k, GaloisKey { index: k, galois: g, ksk });
    }
    s_coeff.to_ntt().expect("coefficient form");
    Ok(GaloisKeySet { keys })
}

/// Secret, public, relinearization and rotation keys from one generator.
pub fn keygen<R: RngCore + ?Sized>(params: &CkksParams, rotation_indices: &[i64], rng: &mut R) -> Result<KeySet> {
    let secret = gen_secret_key(params, rng);
    let public = gen_public_key(params, &secret, rng);
    let relin = gen_relin_key(params, &secret, rng);
    let galois = gen_galois_keys(params, &secret, rotation_indices, rng)?;
    Ok(KeySet {
        secret,
        public,
        relin,
        galois,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha20Rng;

    fn small() -> CkksParams {
        CkksParams::new("small", 64, 3, 30, 2).unwrap()
    }

    #[test]
    fn galois_set_dedups_and_validates() {
        let p = small();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let sk = gen_secret_key(&p, &mut rng);
        assert!(gen_galois_keys(&p, &sk, &[], &mut rng).unwrap().is_empty());
        let g = gen_galois_keys(&p, &sk, &[1, 1, 2], &mut rng).unwrap();
        assert_eq!(g.indices(), alloc::vec![1, 2]);
        for bad in [0, 32, -32, 100] {
            assert!(matches!(
                gen_galois_keys(&p, &sk, &[bad], &mut rng),
                Err(Error::PlannerContract(_))
            ));
        }
    }

    #[test]
    fn keygen_is_deterministic_under_seed() {
        let p = small();
        let a = keygen(&p, &[1, -3], &mut ChaCha20Rng::seed_from_u64(5)).unwrap();
        let b = keygen(&p, &[1, -3], &mut ChaCha20Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.secret, b.secret);
        assert_eq!(a.public, b.public);
        assert_eq!(a.relin, b.relin);
        assert_eq!(a.galois, b.galois);
    }

    #[test]
    fn public_key_is_small_under_secret() {
        let p = small();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let sk = gen_secret_key(&p, &mut rng);
        let pk = gen_public_key(&p, &sk, &mut rng);
        let s = sk.s.truncate(p.q_basis().len()).unwrap();
        let e = pk.b.add(&pk.a.mul(&s).unwrap()).unwrap().ntt_inverse().unwrap();
        let m = e.basis().modulus(0);
        assert!(e.limb(0).iter().all(|&c| m.center(c).abs() < 40));
    }

    #[test]
    fn normalization_is_symmetric() {
        assert_eq!(normalize_rotation(5, 16), 5);
        assert_eq!(normalize_rotation(-3, 16), -3);
        assert_eq!(normalize_rotation(13, 16), -3);
        assert_eq!(normalize_rotation(8, 16), 8);
        assert_eq!(normalize_rotation(-8, 16), 8);
        assert_eq!(galois_element(-1, 16), galois_element(7, 16));
    }
}
