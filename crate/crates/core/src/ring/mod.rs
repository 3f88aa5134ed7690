//! Exact arithmetic in `Z_Q[X]/(X^N + 1)` with `Q` split over NTT primes.

mod basis;
mod modulus;
mod poly;
mod primes;
mod sampling;

pub use basis::RnsBasis;
pub use modulus::{inv_mod, is_prime, mul_mod, pow_mod, shoup, PrimeModulus};
pub use poly::{Domain, RingPoly};
pub use primes::ntt_primes;
pub use sampling::{
    gaussian_coeffs, sample_gaussian, sample_ternary, sample_uniform, standard_normal,
    ternary_coeffs, uniform_below, unit_f64,
};
