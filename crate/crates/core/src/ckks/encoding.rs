use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use super::params::CkksParams;
use crate::error::{Error, Result};
use crate::ring::{Domain, RingPoly};

/// An encoded message: NTT-domain polynomial over the level-`level` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Plaintext {
    pub(crate) poly: RingPoly,
    pub(crate) scale: f64,
    pub(crate) level: usize,
}

impl Plaintext {
    pub fn poly(&self) -> &RingPoly {
        &self.poly
    }
    pub fn scale(&self) -> f64 {
        self.scale
    }
    pub fn level(&self) -> usize {
        self.level
    }
}

/// Canonical-embedding encoder with precomputed roots.
///
/// Slot `j` corresponds to evaluation at `ζ^{5^j}` (ζ a primitive `2N`-th
/// complex root), so the automorphism `X → X^{5^k}` shifts slots left by `k`.
#[derive(Debug, Clone)]
pub struct Encoder {
    n: usize,
    slots: usize,
    rot_group: Vec<usize>,
    ksi: Vec<Complex64>,
}

impl Encoder {
    pub fn new(n: usize) -> Self {
        let slots = n / 2;
        let m = 2 * n;
        let mut rot_group = Vec::with_capacity(slots);
        let mut g = 1usize;
        for _ in 0..slots {
            rot_group.push(g);
            g = g * 5 % m;
        }
        let ksi = (0..=m)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / m as f64;
                Complex64::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        Encoder {
            n,
            slots,
            rot_group,
            ksi,
        }
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    fn bit_reverse(v: &mut [Complex64]) {
        let n = v.len();
        let mut j = 0;
        for i in 1..n {
            let mut bit = n >> 1;
            while j & bit != 0 {
                j ^= bit;
                bit >>= 1;
            }
            j |= bit;
            if i < j {
                v.swap(i, j);
            }
        }
    }

    /// Coefficient-side values → slot values.
    fn fft_special(&self, v: &mut [Complex64]) {
        let size = v.len();
        let m = 2 * self.n;
        Self::bit_reverse(v);
        let mut len = 2;
        while len <= size {
            let lenh = len >> 1;
            let lenq = len << 2;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (self.rot_group[j] % lenq) * m / lenq;
                    let u = v[i + j];
                    let w = v[i + j + lenh] * self.ksi[idx];
                    v[i + j] = u + w;
                    v[i + j + lenh] = u - w;
                }
            }
            len <<= 1;
        }
    }

    /// Slot values → coefficient-side values (inverse of [`fft_special`]).
    fn fft_special_inv(&self, v: &mut [Complex64]) {
        let size = v.len();
        let m = 2 * self.n;
        let mut len = size;
        while len >= 2 {
            let lenh = len >> 1;
            let lenq = len << 2;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (lenq - (self.rot_group[j] % lenq)) * m / lenq;
                    let u = v[i + j] + v[i + j + lenh];
                    let w = (v[i + j] - v[i + j + lenh]) * self.ksi[idx];
                    v[i + j] = u;
                    v[i + j + lenh] = w;
                }
            }
            len >>= 1;
        }
        Self::bit_reverse(v);
        let inv = 1.0 / size as f64;
        for x in v.iter_mut() {
            *x *= inv;
        }
    }

    /// Integer coefficients `round(Δ · embedding^{-1}(values))`; missing
    /// slots are zero.
    pub fn encode_coeffs(&self, values: &[f64], scale: f64) -> Result<Vec<i128>> {
        if values.len() > self.slots {
            return Err(Error::Capacity(alloc::format!(
                "{} values exceed the {} available slots",
                values.len(),
                self.slots
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(alloc::format!("cannot encode non-finite value {bad}")));
        }
        let mut v: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        v.resize(self.slots, Complex64::new(0.0, 0.0));
        self.fft_special_inv(&mut v);
        let mut coeffs = alloc::vec![0i128; self.n];
        for (i, c) in v.iter().enumerate() {
            coeffs[i] = libm::round(c.re * scale) as i128;
            coeffs[i + self.slots] = libm::round(c.im * scale) as i128;
        }
        Ok(coeffs)
    }

    /// Slot values of centered integer coefficients divided by `scale`.
    pub fn decode_coeffs(&self, coeffs: &[i128], scale: f64) -> Vec<f64> {
        let mut v: Vec<Complex64> = (0..self.slots)
            .map(|i| Complex64::new(coeffs[i] as f64 / scale, coeffs[i + self.slots] as f64 / scale))
            .collect();
        self.fft_special(&mut v);
        v.into_iter().map(|c| c.re).collect()
    }

    /// Encodes at `level` with an explicit scale.
    pub fn encode_at(&self, params: &CkksParams, values: &[f64], level: usize, scale: f64) -> Result<Plaintext> {
        if level > params.depth() {
            return Err(Error::Structural(alloc::format!(
                "level {level} above depth {}",
                params.depth()
            )));
        }
        let coeffs = self.encode_coeffs(values, scale)?;
        let basis = params.basis_at(level);
        let limbs = basis
            .moduli()
            .iter()
            .map(|m| {
                let mut l: Vec<u64> = coeffs.iter().map(|&c| m.reduce_i128(c)).collect();
                m.ntt_forward(&mut l);
                l
            })
            .collect();
        Ok(Plaintext {
            poly: RingPoly::from_parts_unchecked(basis, limbs, Domain::Ntt),
            scale,
            level,
        })
    }

    /// Encodes at `level` with that level's canonical scale.
    pub fn encode(&self, params: &CkksParams, values: &[f64], level: usize) -> Result<Plaintext> {
        self.encode_at(params, values, level, params.scale_at(level.min(params.depth())))
    }

    /// Decodes a plaintext (any level) back to `slots` reals.
    pub fn decode(&self, pt: &Plaintext) -> Vec<f64> {
        let mut poly = pt.poly.clone();
        if poly.domain() == Domain::Ntt {
            poly.to_coeff().expect("ntt domain checked");
        }
        self.decode_coeffs(&centered_coeffs(&poly), pt.scale)
    }
}

/// Centered integer coefficients reconstructed from the first one or two
/// limbs (CRT over `q_0 q_1` when available).
pub(crate) fn centered_coeffs(p: &RingPoly) -> Vec<i128> {
    let b = p.basis();
    let m0 = b.modulus(0);
    if b.len() == 1 {
        return p.limb(0).iter().map(|&c| m0.center(c) as i128).collect();
    }
    let m1 = b.modulus(1);
    let (q0, q1) = (m0.value() as u128, m1.value() as u128);
    let q = q0 * q1;
    let q0_inv_mod_q1 = m1.inv(m0.value() % m1.value()) as u128;
    p.limb(0)
        .iter()
        .zip(p.limb(1))
        .map(|(&a0, &a1)| {
            // x = a0 + q0 * ((a1 - a0) * q0^{-1} mod q1)
            let d = m1.sub(a1, m1.reduce(a0)) as u128;
            let t = m1.mul(d as u64, q0_inv_mod_q1 as u64) as u128;
            let x = a0 as u128 + q0 * t;
            if x > q / 2 {
                -((q - x) as i128)
            } else {
                x as i128
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (r.next_u64() >> 11) as f64 / (1u64 << 52) as f64 - 1.0).collect()
    }

    #[test]
    fn roundtrip_within_documented_tolerance() {
        let p = CkksParams::test().unwrap();
        let e = Encoder::new(p.n());
        let v = rand_vec(p.slots(), 3);
        let tol = libm::exp2(-((p.scale_bits() - 12 - 4) as f64));
        for level in [0, 1, p.depth()] {
            let d = e.decode(&e.encode(&p, &v, level).unwrap());
            let err = v.iter().zip(&d).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < tol, "level {level}: {err}");
        }
        let z = e.decode(&e.encode(&p, &alloc::vec![0.0; 8], 3).unwrap());
        assert!(z.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn short_vector_pads_with_zeros() {
        let p = CkksParams::test().unwrap();
        let e = Encoder::new(p.n());
        let d = e.decode(&e.encode(&p, &[0.75], 2).unwrap());
        assert!((d[0] - 0.75).abs() < 1e-9);
        assert!(d[1..].iter().all(|x| x.abs() < 1e-9));
        assert!(matches!(
            e.encode(&p, &alloc::vec![0.0; p.slots() + 1], 2),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn automorphism_five_shifts_slots_left() {
        let p = CkksParams::test().unwrap();
        let e = Encoder::new(p.n());
        let v = rand_vec(p.slots(), 5);
        let pt = e.encode(&p, &v, 1).unwrap();
        let g = 5u64.pow(3) % (2 * p.n() as u64);
        let rotated = pt.poly.ntt_inverse().unwrap().automorphism(g).unwrap().ntt_forward().unwrap();
        let d = e.decode(&Plaintext { poly: rotated, ..pt });
        for i in 0..p.slots() {
            assert!((d[i] - v[(i + 3) % p.slots()]).abs() < 1e-8);
        }
    }
}
