use alloc::sync::Arc;
use alloc::vec::Vec;

use super::modulus::PrimeModulus;
use crate::error::{Error, Result};

/// An ordered list of distinct NTT primes sharing one ring dimension.
///
/// Cloning is cheap: moduli (with their twiddle tables) are reference counted.
#[derive(Debug, Clone)]
pub struct RnsBasis {
    n: usize,
    moduli: Vec<Arc<PrimeModulus>>,
}

impl PartialEq for RnsBasis {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.moduli.len() == other.moduli.len()
            && self
                .moduli
                .iter()
                .zip(&other.moduli)
                .all(|(a, b)| a.value() == b.value())
    }
}
impl Eq for RnsBasis {}

impl RnsBasis {
    pub fn new(n: usize, primes: &[u64]) -> Result<Self> {
        let moduli = primes
            .iter()
            .map(|&q| PrimeModulus::new(q, n).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        Self::from_moduli(n, moduli)
    }

    pub fn from_moduli(n: usize, moduli: Vec<Arc<PrimeModulus>>) -> Result<Self> {
        if moduli.is_empty() {
            return Err(Error::Parameter("RNS basis needs at least one modulus".into()));
        }
        for (i, m) in moduli.iter().enumerate() {
            if m.n() != n {
                return Err(Error::Parameter(alloc::format!(
                    "modulus {} built for N={} in a basis of N={n}",
                    m.value(),
                    m.n()
                )));
            }
            if moduli[..i].iter().any(|o| o.value() == m.value()) {
                return Err(Error::Parameter(alloc::format!(
                    "duplicate modulus {} in RNS basis",
                    m.value()
                )));
            }
        }
        Ok(RnsBasis { n, moduli })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }

    #[inline]
    pub fn modulus(&self, i: usize) -> &PrimeModulus {
        &self.moduli[i]
    }

    pub fn moduli(&self) -> &[Arc<PrimeModulus>] {
        &self.moduli
    }

    pub fn values(&self) -> Vec<u64> {
        self.moduli.iter().map(|m| m.value()).collect()
    }

    /// Basis formed by the first `k` moduli.
    pub fn prefix(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.len() {
            return Err(Error::Structural(alloc::format!(
                "prefix of length {k} from a basis of {}",
                self.len()
            )));
        }
        Ok(RnsBasis {
            n: self.n,
            moduli: self.moduli[..k].to_vec(),
        })
    }

    /// Concatenation `self ∪ other`; the moduli must stay distinct.
    pub fn extend(&self, other: &RnsBasis) -> Result<Self> {
        let mut moduli = self.moduli.clone();
        moduli.extend(other.moduli.iter().cloned());
        Self::from_moduli(self.n, moduli)
    }

    /// Basis selecting the given positions, in the order given.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        Self::from_moduli(self.n, idx.iter().map(|&i| self.moduli[i].clone()).collect())
    }

    /// Sum of `log2 q_i`.
    pub fn bits(&self) -> f64 {
        self.moduli.iter().map(|m| libm::log2(m.value() as f64)).sum()
    }
}
