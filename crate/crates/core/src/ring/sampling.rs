use alloc::vec::Vec;

use rand_core::RngCore;

use super::basis::RnsBasis;
use super::poly::{Domain, RingPoly};

/// Uniform draw from `[0, q)` by masked rejection.
#[inline]
pub fn uniform_below<R: RngCore + ?Sized>(rng: &mut R, q: u64) -> u64 {
    let mask = u64::MAX >> (q - 1).leading_zeros();
    loop {
        let x = rng.next_u64() & mask;
        if x < q {
            return x;
        }
    }
}

/// Uniform `f64` in `[0, 1)` with 53 random bits.
#[inline]
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// One standard normal variate (Box-Muller).
pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let u1 = 1.0 - unit_f64(rng); // (0, 1]
    let u2 = unit_f64(rng);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

/// `n` coefficients uniform over `{-1, 0, 1}`.
pub fn ternary_coeffs<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Vec<i64> {
    (0..n).map(|_| uniform_below(rng, 3) as i64 - 1).collect()
}

/// `n` rounded Gaussian coefficients with standard deviation `sigma`.
pub fn gaussian_coeffs<R: RngCore + ?Sized>(n: usize, sigma: f64, rng: &mut R) -> Vec<i64> {
    (0..n)
        .map(|_| libm::round(standard_normal(rng) * sigma) as i64)
        .collect()
}

/// Ternary secret-style polynomial in the coefficient domain.
pub fn sample_ternary<R: RngCore + ?Sized>(basis: &RnsBasis, rng: &mut R) -> RingPoly {
    RingPoly::from_signed(basis, &ternary_coeffs(basis.n(), rng)).expect("length matches basis")
}

/// Rounded-Gaussian error polynomial in the coefficient domain.
pub fn sample_gaussian<R: RngCore + ?Sized>(basis: &RnsBasis, sigma: f64, rng: &mut R) -> RingPoly {
    RingPoly::from_signed(basis, &gaussian_coeffs(basis.n(), sigma, rng)).expect("length matches basis")
}

/// Polynomial with every residue uniform; the distribution is the same in
/// both domains, so the caller picks the label.
pub fn sample_uniform<R: RngCore + ?Sized>(basis: &RnsBasis, domain: Domain, rng: &mut R) -> RingPoly {
    let limbs = basis
        .moduli()
        .iter()
        .map(|m| (0..basis.n()).map(|_| uniform_below(rng, m.value())).collect())
        .collect();
    RingPoly::from_parts_unchecked(basis.clone(), limbs, domain)
}
