use alloc::vec::Vec;

use super::basis::RnsBasis;
use crate::error::{Error, Result};

/// Representation of a [`RingPoly`]'s limbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Coefficient,
    Ntt,
}

/// An element of `Z[X]/(X^N + 1)` stored as one residue vector per modulus.
///
/// Invariant: `limbs.len() == basis.len()`, every limb has length `N`, and
/// limb `i` holds values in `[0, q_i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingPoly {
    basis: RnsBasis,
    limbs: Vec<Vec<u64>>,
    domain: Domain,
}

impl RingPoly {
    pub fn zero(basis: &RnsBasis, domain: Domain) -> Self {
        RingPoly {
            limbs: alloc::vec![alloc::vec![0; basis.n()]; basis.len()],
            basis: basis.clone(),
            domain,
        }
    }

    /// Coefficient-domain polynomial from signed integer coefficients.
    pub fn from_signed(basis: &RnsBasis, coeffs: &[i64]) -> Result<Self> {
        if coeffs.len() != basis.n() {
            return Err(Error::Structural(alloc::format!(
                "{} coefficients for ring dimension {}",
                coeffs.len(),
                basis.n()
            )));
        }
        let limbs = basis
            .moduli()
            .iter()
            .map(|m| coeffs.iter().map(|&c| m.reduce_i64(c)).collect())
            .collect();
        Ok(RingPoly {
            basis: basis.clone(),
            limbs,
            domain: Domain::Coefficient,
        })
    }

    /// Builds from raw residues, checking shape and reduction.
    pub fn from_limbs(basis: &RnsBasis, limbs: Vec<Vec<u64>>, domain: Domain) -> Result<Self> {
        if limbs.len() != basis.len() {
            return Err(Error::Structural(alloc::format!(
                "{} limbs for a basis of {} moduli",
                limbs.len(),
                basis.len()
            )));
        }
        for (i, limb) in limbs.iter().enumerate() {
            let q = basis.modulus(i).value();
            if limb.len() != basis.n() {
                return Err(Error::Structural(alloc::format!(
                    "limb {i} has length {} instead of {}",
                    limb.len(),
                    basis.n()
                )));
            }
            if limb.iter().any(|&c| c >= q) {
                return Err(Error::Structural(alloc::format!(
                    "limb {i} holds a value not reduced modulo {q}"
                )));
            }
        }
        Ok(RingPoly {
            basis: basis.clone(),
            limbs,
            domain,
        })
    }

    pub(crate) fn from_parts_unchecked(basis: RnsBasis, limbs: Vec<Vec<u64>>, domain: Domain) -> Self {
        debug_assert_eq!(limbs.len(), basis.len());
        RingPoly {
            basis,
            limbs,
            domain,
        }
    }

    #[inline]
    pub fn basis(&self) -> &RnsBasis {
        &self.basis
    }

    #[inline]
    pub fn domain(&self) -> Domain {
        self.domain
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn limbs(&self) -> &[Vec<u64>] {
        &self.limbs
    }

    pub fn limb(&self, i: usize) -> &[u64] {
        &self.limbs[i]
    }

    pub(crate) fn limbs_mut(&mut self) -> &mut [Vec<u64>] {
        &mut self.limbs
    }

    pub(crate) fn into_limbs(self) -> Vec<Vec<u64>> {
        self.limbs
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.iter().all(|l| l.iter().all(|&c| c == 0))
    }

    fn expect_domain(&self, d: Domain, op: &str) -> Result<()> {
        if self.domain != d {
            return Err(Error::DomainMismatch(alloc::format!(
                "{op} expects {d:?} input, got {:?}",
                self.domain
            )));
        }
        Ok(())
    }

    fn check_compatible(&self, other: &RingPoly, op: &str) -> Result<()> {
        if self.basis != other.basis {
            return Err(Error::Structural(alloc::format!(
                "{op}: operands live over different RNS bases ({} vs {} moduli)",
                self.basis.len(),
                other.basis.len()
            )));
        }
        if self.domain != other.domain {
            return Err(Error::DomainMismatch(alloc::format!(
                "{op}: {:?} operand mixed with {:?} operand",
                self.domain,
                other.domain
            )));
        }
        Ok(())
    }

    /// Coefficient → NTT. Errors if already in the NTT domain.
    pub fn ntt_forward(&self) -> Result<RingPoly> {
        let mut p = self.clone();
        p.to_ntt()?;
        Ok(p)
    }

    /// NTT → coefficient. Errors if already in the coefficient domain.
    pub fn ntt_inverse(&self) -> Result<RingPoly> {
        let mut p = self.clone();
        p.to_coeff()?;
        Ok(p)
    }

    pub fn to_ntt(&mut self) -> Result<()> {
        self.expect_domain(Domain::Coefficient, "ntt_forward")?;
        for (i, limb) in self.limbs.iter_mut().enumerate() {
            self.basis.modulus(i).ntt_forward(limb);
        }
        self.domain = Domain::Ntt;
        Ok(())
    }

    pub fn to_coeff(&mut self) -> Result<()> {
        self.expect_domain(Domain::Ntt, "ntt_inverse")?;
        for (i, limb) in self.limbs.iter_mut().enumerate() {
            self.basis.modulus(i).ntt_inverse(limb);
        }
        self.domain = Domain::Coefficient;
        Ok(())
    }

    fn zip_with(&self, other: &RingPoly, op: &str, f: impl Fn(&super::PrimeModulus, u64, u64) -> u64) -> Result<RingPoly> {
        self.check_compatible(other, op)?;
        let limbs = self
            .limbs
            .iter()
            .zip(&other.limbs)
            .enumerate()
            .map(|(i, (a, b))| {
                let m = self.basis.modulus(i);
                a.iter().zip(b).map(|(&x, &y)| f(m, x, y)).collect()
            })
            .collect();
        Ok(RingPoly {
            basis: self.basis.clone(),
            limbs,
            domain: self.domain,
        })
    }

    pub fn add(&self, other: &RingPoly) -> Result<RingPoly> {
        self.zip_with(other, "poly_add", |m, a, b| m.add(a, b))
    }

    pub fn sub(&self, other: &RingPoly) -> Result<RingPoly> {
        self.zip_with(other, "poly_sub", |m, a, b| m.sub(a, b))
    }

    pub fn add_assign(&mut self, other: &RingPoly) -> Result<()> {
        self.check_compatible(other, "poly_add")?;
        for (i, (a, b)) in self.limbs.iter_mut().zip(&other.limbs).enumerate() {
            let m = self.basis.modulus(i);
            for (x, &y) in a.iter_mut().zip(b) {
                *x = m.add(*x, y);
            }
        }
        Ok(())
    }

    pub fn neg(&self) -> RingPoly {
        let limbs = self
            .limbs
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let m = self.basis.modulus(i);
                a.iter().map(|&x| m.neg(x)).collect()
            })
            .collect();
        RingPoly {
            basis: self.basis.clone(),
            limbs,
            domain: self.domain,
        }
    }

    /// Ring product. NTT operands multiply slot-wise; coefficient operands
    /// are transformed internally and the result returned in coefficient form.
    pub fn mul(&self, other: &RingPoly) -> Result<RingPoly> {
        self.check_compatible(other, "poly_mul")?;
        match self.domain {
            Domain::Ntt => self.zip_with(other, "poly_mul", |m, a, b| m.mul(a, b)),
            Domain::Coefficient => {
                let mut r = self.ntt_forward()?.mul(&other.ntt_forward()?)?;
                r.to_coeff()?;
                Ok(r)
            }
        }
    }

    /// Multiplies by an integer constant (valid in either domain).
    pub fn mul_scalar(&self, c: i128) -> RingPoly {
        let limbs = self
            .limbs
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let m = self.basis.modulus(i);
                let c = m.reduce_i128(c);
                let cs = super::modulus::shoup(c, m.value());
                a.iter().map(|&x| m.mul_shoup(x, c, cs)).collect()
            })
            .collect();
        RingPoly {
            basis: self.basis.clone(),
            limbs,
            domain: self.domain,
        }
    }

    /// Multiplies limb `i` by `c[i]` (one residue per modulus).
    pub fn mul_rns_scalar(&self, c: &[u64]) -> Result<RingPoly> {
        if c.len() != self.basis.len() {
            return Err(Error::Structural("RNS scalar length differs from basis".into()));
        }
        let limbs = self
            .limbs
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let m = self.basis.modulus(i);
                let ci = m.reduce(c[i]);
                let cs = super::modulus::shoup(ci, m.value());
                a.iter().map(|&x| m.mul_shoup(x, ci, cs)).collect()
            })
            .collect();
        Ok(RingPoly {
            basis: self.basis.clone(),
            limbs,
            domain: self.domain,
        })
    }

    /// `X → X^g` in either domain. In the NTT domain it is a permutation:
    /// slot `j` holds the evaluation at `ψ^(2·rev(j)+1)`.
    pub fn automorphism(&self, g: u64) -> Result<RingPoly> {
        let n = self.n();
        let two_n = 2 * n as u64;
        if g % 2 == 0 {
            return Err(Error::InvalidAutomorphism(g));
        }
        let g = g % two_n;
        if self.domain == Domain::Ntt {
            let bits = n.trailing_zeros();
            let rev = |x: usize| if bits == 0 { 0 } else { x.reverse_bits() >> (usize::BITS - bits) };
            let src: Vec<usize> = (0..n)
                .map(|j| {
                    let e = ((2 * rev(j) as u64 + 1) * g) % two_n;
                    rev(((e - 1) / 2) as usize)
                })
                .collect();
            let limbs = self.limbs.iter().map(|a| src.iter().map(|&k| a[k]).collect()).collect();
            return Ok(RingPoly {
                basis: self.basis.clone(),
                limbs,
                domain: Domain::Ntt,
            });
        }
        let limbs = self
            .limbs
            .iter()
            .enumerate()
            .map(|(l, a)| {
                let m = self.basis.modulus(l);
                let mut out = alloc::vec![0u64; n];
                let mut idx = 0u64;
                for &c in a.iter() {
                    let j = idx as usize;
                    if j < n {
                        out[j] = c;
                    } else {
                        out[j - n] = m.neg(c);
                    }
                    idx = (idx + g) % two_n;
                }
                out
            })
            .collect();
        Ok(RingPoly {
            basis: self.basis.clone(),
            limbs,
            domain: Domain::Coefficient,
        })
    }

    /// Keeps the first `k` limbs (exact modulus switching by dropping
    /// primes; the represented value is unchanged modulo the kept product).
    pub fn truncate(&self, k: usize) -> Result<RingPoly> {
        let basis = self.basis.prefix(k)?;
        Ok(RingPoly {
            basis,
            limbs: self.limbs[..k].to_vec(),
            domain: self.domain,
        })
    }

    /// Divides by the last modulus with rounding and drops it from the basis.
    /// Works in either domain; the output keeps the input's domain.
    pub fn rns_drop_last(&self) -> Result<RingPoly> {
        let k = self.basis.len();
        if k < 2 {
            return Err(Error::LevelExhausted {
                op: "rns_drop_last",
                required: 1,
                available: 0,
            });
        }
        let last_m = self.basis.modulus(k - 1);
        let ql = last_m.value();
        let mut last = self.limbs[k - 1].clone();
        if self.domain == Domain::Ntt {
            last_m.ntt_inverse(&mut last);
        }
        let half = ql / 2;
        let basis = self.basis.prefix(k - 1)?;
        let limbs = (0..k - 1)
            .map(|j| {
                let m = basis.modulus(j);
                let qj = m.value();
                let ql_mod = ql % qj;
                let inv = m.inv(ql_mod);
                let inv_s = super::modulus::shoup(inv, qj);
                let mut r: Vec<u64> = last
                    .iter()
                    .map(|&c| {
                        let v = m.reduce(c);
                        if c > half {
                            m.sub(v, ql_mod)
                        } else {
                            v
                        }
                    })
                    .collect();
                if self.domain == Domain::Ntt {
                    m.ntt_forward(&mut r);
                }
                self.limbs[j]
                    .iter()
                    .zip(&r)
                    .map(|(&a, &b)| m.mul_shoup(m.sub(a, b), inv, inv_s))
                    .collect()
            })
            .collect();
        Ok(RingPoly {
            basis,
            limbs,
            domain: self.domain,
        })
    }
}
