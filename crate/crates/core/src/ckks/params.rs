use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ring::{ntt_primes, RnsBasis};

/// Size of the base prime `q_0`, which carries the decrypted message at level 0.
pub const BASE_PRIME_BITS: u32 = 60;
/// Size of each special (key-switching) prime.
pub const SPECIAL_PRIME_BITS: u32 = 60;
/// Standard deviation of fresh encryption and key errors.
pub const ERROR_STDDEV: f64 = 3.2;

/// Leveled RNS-CKKS parameters.
///
/// A ciphertext at level `ℓ` lives over `q_0..=q_ℓ` and can absorb `ℓ`
/// more rescaled multiplications; fresh ciphertexts sit at level `depth`.
/// Every level has one canonical scale: `Δ_depth = 2^scale_bits` and
/// `Δ_{ℓ-1} = Δ_ℓ^2 / q_ℓ`, so products of two level-`ℓ` operands rescale
/// exactly onto the canonical scale of level `ℓ - 1`.
///
/// Key switching uses the hybrid method: the `q` primes are split into
/// `dnum` digits and a special modulus `P` (a product of 60-bit primes)
/// larger than every digit absorbs the decomposition noise.
///
/// Fresh-encryption error: with ternary `v` and Gaussian `e` of stddev 3.2
/// the slot error of a fresh ciphertext is about `8·σ·sqrt(N)/Δ`, i.e.
/// below `1e-8` at the test profile and `1e-13` at the lenet5 and resnet19 profiles.
#[derive(Debug, Clone)]
pub struct CkksParams {
    name: String,
    n: usize,
    depth: usize,
    scale_bits: u32,
    dnum: usize,
    q: RnsBasis,
    p: RnsBasis,
    key_basis: RnsBasis,
    scales: Vec<f64>,
    digest: [u8; 32],
}

impl PartialEq for CkksParams {
    fn eq(&self, other: &Self) -> bool {
        self.digest == other.digest
    }
}

impl CkksParams {
    /// Generates primes for ring dimension `n`, multiplicative depth `depth`
    /// and scaling factor `2^scale_bits`, with `dnum` key-switching digits.
    pub fn new(name: &str, n: usize, depth: usize, scale_bits: u32, dnum: usize) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::Parameter(alloc::format!(
                "ring dimension {n} must be a power of two >= 16"
            )));
        }
        if !(20..=60).contains(&scale_bits) {
            return Err(Error::Parameter(alloc::format!(
                "scale of 2^{scale_bits} outside 2^20..=2^60"
            )));
        }
        if dnum == 0 || dnum > depth + 1 {
            return Err(Error::Parameter(alloc::format!(
                "{dnum} key-switching digits for {} primes",
                depth + 1
            )));
        }
        let mut primes = ntt_primes(BASE_PRIME_BITS, 1, n, &[])?;
        primes.extend(ntt_primes(scale_bits, depth, n, &primes)?);
        let q = RnsBasis::new(n, &primes)?;

        let alpha = (depth + 1).div_ceil(dnum);
        let max_digit_bits = (0..dnum)
            .map(|j| {
                let r = digit_range(j, alpha, depth + 1);
                r.map(|i| libm::log2(primes[i] as f64)).sum::<f64>()
            })
            .fold(0.0, f64::max);
        let k = libm::ceil((max_digit_bits + 1.0) / (SPECIAL_PRIME_BITS as f64 - 1.0)) as usize;
        let specials = ntt_primes(SPECIAL_PRIME_BITS, k.max(1), n, &primes)?;
        let p = RnsBasis::new(n, &specials)?;
        let key_basis = q.extend(&p)?;

        let mut scales = alloc::vec![0.0; depth + 1];
        scales[depth] = libm::exp2(scale_bits as f64);
        for l in (1..=depth).rev() {
            scales[l - 1] = scales[l] * scales[l] / primes[l] as f64;
        }

        let mut h = Sha256::new();
        h.update(b"snnhe-ckks-params-v1");
        for v in [n as u64, depth as u64, scale_bits as u64, dnum as u64] {
            h.update(v.to_le_bytes());
        }
        for v in q.values().into_iter().chain(p.values()) {
            h.update(v.to_le_bytes());
        }
        let digest: [u8; 32] = h.finalize().into();

        Ok(CkksParams {
            name: name.into(),
            n,
            depth,
            scale_bits,
            dnum,
            q,
            p,
            key_basis,
            scales,
            digest,
        })
    }

    /// LeNet-5 profile: N = 16384, 8192 slots, depth 12, Δ = 2^56.
    pub fn lenet5() -> Result<Self> {
        Self::new("lenet5", 1 << 14, 12, 56, 1)
    }

    /// ResNet-19 profile: N = 32768, 16384 slots, depth 12, Δ = 2^56.
    pub fn resnet19() -> Result<Self> {
        Self::new("resnet19", 1 << 15, 12, 56, 1)
    }

    /// Fast profile for tests: N = 4096, depth 9, Δ = 2^40.
    pub fn test() -> Result<Self> {
        Self::new("test", 1 << 12, 9, 40, 1)
    }

    /// Looks up a shipped profile by name (`lenet5`, `resnet19`, `test`).
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "lenet5" => Self::lenet5(),
            "resnet19" => Self::resnet19(),
            "test" => Self::test(),
            other => Err(Error::Parameter(alloc::format!(
                "unknown parameter profile `{other}` (expected lenet5, resnet19 or test)"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn slots(&self) -> usize {
        self.n / 2
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn scale_bits(&self) -> u32 {
        self.scale_bits
    }

    pub fn dnum(&self) -> usize {
        self.dnum
    }

    /// The ciphertext modulus chain `q_0..=q_depth`.
    pub fn q_basis(&self) -> &RnsBasis {
        &self.q
    }

    /// The special primes forming `P`.
    pub fn p_basis(&self) -> &RnsBasis {
        &self.p
    }

    /// `q_0..=q_depth` followed by the special primes.
    pub fn key_basis(&self) -> &RnsBasis {
        &self.key_basis
    }

    /// Ciphertext basis at `level` (`level + 1` primes).
    pub fn basis_at(&self, level: usize) -> RnsBasis {
        self.q.prefix(level + 1).expect("level within depth")
    }

    /// Canonical scale of `level`.
    pub fn scale_at(&self, level: usize) -> f64 {
        self.scales[level]
    }

    /// Prime indices of digit `j`, restricted to the primes present at `level`.
    pub fn digit(&self, j: usize, level: usize) -> Range<usize> {
        let alpha = (self.depth + 1).div_ceil(self.dnum);
        digit_range(j, alpha, level + 1)
    }

    /// SHA-256 over the parameter description and all primes.
    pub fn digest(&self) -> &[u8; 32] {
        &self.digest
    }
}

fn digit_range(j: usize, alpha: usize, count: usize) -> Range<usize> {
    let start = (j * alpha).min(count);
    let end = ((j + 1) * alpha).min(count);
    start..end
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_profiles_match_table() {
        for (p, n, slots) in [
            (CkksParams::lenet5().unwrap(), 16384, 8192),
            (CkksParams::resnet19().unwrap(), 32768, 16384),
        ] {
            assert_eq!(p.n(), n);
            assert_eq!(p.slots(), slots);
            assert_eq!(p.depth(), 12);
            assert_eq!(p.scale_bits(), 56);
            assert_eq!(p.q_basis().len(), 13);
            assert_eq!(p.scale_at(12), libm::exp2(56.0));
        }
        let t = CkksParams::test().unwrap();
        assert_eq!((t.n(), t.slots(), t.depth(), t.scale_bits()), (4096, 2048, 9, 40));
        assert!(CkksParams::by_name("huge").is_err());
    }

    #[test]
    fn special_modulus_exceeds_every_digit() {
        for dnum in [1, 2, 3, 10] {
            let p = CkksParams::new("t", 1 << 10, 9, 40, dnum).unwrap();
            let digit_bits = (0..dnum)
                .map(|j| p.digit(j, 9).map(|i| libm::log2(p.q_basis().modulus(i).value() as f64)).sum::<f64>())
                .fold(0.0, f64::max);
            assert!(p.p_basis().bits() > digit_bits);
            let covered: usize = (0..dnum).map(|j| p.digit(j, 9).len()).sum();
            assert_eq!(covered, 10);
        }
    }

    #[test]
    fn canonical_scales_stay_near_nominal() {
        let p = CkksParams::test().unwrap();
        for l in 0..=9 {
            let r = p.scale_at(l) / libm::exp2(40.0);
            assert!((r - 1.0).abs() < 1e-2, "level {l}: ratio {r}");
        }
    }
}
