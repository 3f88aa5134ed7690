use alloc::vec::Vec;

use super::modulus::is_prime;
use crate::error::{Error, Result};

/// The `count` largest primes `q < 2^bits` with `q ≡ 1 (mod 2n)`, in
/// descending order, skipping anything listed in `exclude`.
pub fn ntt_primes(bits: u32, count: usize, n: usize, exclude: &[u64]) -> Result<Vec<u64>> {
    if !(20..=62).contains(&bits) {
        return Err(Error::Parameter(alloc::format!(
            "prime size {bits} bits outside 20..=62"
        )));
    }
    let step = 2 * n as u64;
    let mut out = Vec::with_capacity(count);
    let mut candidate = (1u64 << bits) + 1;
    while out.len() < count {
        candidate = candidate
            .checked_sub(step)
            .filter(|&c| c > 1 << (bits - 1))
            .ok_or_else(|| {
                Error::Parameter(alloc::format!(
                    "not enough {bits}-bit primes congruent to 1 mod {step}"
                ))
            })?;
        if is_prime(candidate) && !exclude.contains(&candidate) {
            out.push(candidate);
        }
    }
    Ok(out)
}
