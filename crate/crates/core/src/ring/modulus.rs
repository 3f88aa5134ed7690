use alloc::vec::Vec;

use crate::error::{Error, Result};

/// `a * b mod q` through a 128-bit remainder. Reference path for
/// setup code; hot loops use [`PrimeModulus::mul`].
#[inline]
pub fn mul_mod(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 * b as u128) % q as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, q: u64) -> u64 {
    let mut acc = 1 % q;
    base %= q;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, q);
        }
        base = mul_mod(base, base, q);
        exp >>= 1;
    }
    acc
}

/// Inverse of `a` modulo prime `q`. Panics on `a ≡ 0`.
pub fn inv_mod(a: u64, q: u64) -> u64 {
    assert!(a % q != 0, "zero has no inverse");
    pow_mod(a, q - 2, q)
}

/// Deterministic Miller-Rabin, exact for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let d_shift = (n - 1).trailing_zeros();
    let d = (n - 1) >> d_shift;
    'witness: for a in BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..d_shift {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Precomputed `floor(w * 2^64 / q)` for Shoup multiplication by `w`.
#[inline]
pub fn shoup(w: u64, q: u64) -> u64 {
    (((w as u128) << 64) / q as u128) as u64
}

/// An NTT-friendly prime `q ≡ 1 (mod 2N)` with Barrett constants and the
/// twiddle tables of the negacyclic transform of length `N`.
#[derive(Debug, Clone)]
pub struct PrimeModulus {
    q: u64,
    ratio_lo: u64,
    ratio_hi: u64,
    n: usize,
    psi: u64,
    n_inv: u64,
    n_inv_shoup: u64,
    psi_rev: Vec<u64>,
    psi_rev_shoup: Vec<u64>,
    psi_inv_rev: Vec<u64>,
    psi_inv_rev_shoup: Vec<u64>,
}

impl PartialEq for PrimeModulus {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q && self.n == other.n
    }
}
impl Eq for PrimeModulus {}

fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

impl PrimeModulus {
    /// Builds tables for `q` and ring dimension `n`.
    ///
    /// Errors when `n` is not a power of two, `q` is not a prime below
    /// 2^62, or `q ≢ 1 (mod 2n)`.
    pub fn new(q: u64, n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Parameter(alloc::format!(
                "ring dimension {n} is not a power of two >= 2"
            )));
        }
        if q >= 1 << 62 || !is_prime(q) {
            return Err(Error::Parameter(alloc::format!(
                "{q} is not a prime below 2^62"
            )));
        }
        let two_n = 2 * n as u64;
        if (q - 1) % two_n != 0 {
            return Err(Error::Parameter(alloc::format!(
                "{q} is not 1 mod {two_n}: no primitive {two_n}-th root of unity"
            )));
        }
        let psi = Self::find_root(q, two_n);
        let ratio = u128::MAX / q as u128; // floor((2^128 - 1) / q) == floor(2^128 / q) for odd q
        let log_n = n.trailing_zeros();
        let psi_inv = inv_mod(psi, q);
        let mut psi_rev = alloc::vec![0u64; n];
        let mut psi_inv_rev = alloc::vec![0u64; n];
        let (mut p, mut pi) = (1u64, 1u64);
        for i in 0..n {
            let r = bit_reverse(i, log_n);
            psi_rev[r] = p;
            psi_inv_rev[r] = pi;
            p = mul_mod(p, psi, q);
            pi = mul_mod(pi, psi_inv, q);
        }
        let psi_rev_shoup = psi_rev.iter().map(|&w| shoup(w, q)).collect();
        let psi_inv_rev_shoup = psi_inv_rev.iter().map(|&w| shoup(w, q)).collect();
        let n_inv = inv_mod(n as u64, q);
        Ok(PrimeModulus {
            q,
            ratio_lo: ratio as u64,
            ratio_hi: (ratio >> 64) as u64,
            n,
            psi,
            n_inv,
            n_inv_shoup: shoup(n_inv, q),
            psi_rev,
            psi_rev_shoup,
            psi_inv_rev,
            psi_inv_rev_shoup,
        })
    }

    /// Smallest-base primitive `order`-th root: `x^((q-1)/order)` for the first
    /// `x >= 2` whose power has order exactly `order` (a power of two).
    fn find_root(q: u64, order: u64) -> u64 {
        let cofactor = (q - 1) / order;
        (2..q)
            .map(|x| pow_mod(x, cofactor, q))
            .find(|&r| pow_mod(r, order / 2, q) == q - 1)
            .expect("prime q = 1 mod order has a primitive root")
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.q
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// The primitive 2N-th root of unity ψ.
    pub fn root(&self) -> u64 {
        self.psi
    }

    /// `N^{-1} mod q`.
    pub fn n_inv(&self) -> u64 {
        self.n_inv
    }

    /// Barrett reduction of a 128-bit value; exact for inputs below `q^2`
    /// and, more generally, below `2^128` for `q < 2^62`.
    #[inline]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        let x0 = x as u64;
        let x1 = (x >> 64) as u64;
        let carry = ((x0 as u128 * self.ratio_lo as u128) >> 64) as u64;
        let t = x0 as u128 * self.ratio_hi as u128 + carry as u128;
        let u = x1 as u128 * self.ratio_lo as u128 + (t as u64) as u128;
        let qhat = ((t >> 64) + (u >> 64) + x1 as u128 * self.ratio_hi as u128) as u64;
        let mut r = x0.wrapping_sub(qhat.wrapping_mul(self.q));
        while r >= self.q {
            r -= self.q;
        }
        r
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        if x >= self.q {
            x % self.q
        } else {
            x
        }
    }

    /// Reduces a signed integer into `[0, q)`.
    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u64 {
        let r = x.rem_euclid(self.q as i64);
        r as u64
    }

    #[inline]
    pub fn reduce_i128(&self, x: i128) -> u64 {
        let r = self.reduce_u128(x.unsigned_abs());
        if x < 0 {
            self.neg(r)
        } else {
            r
        }
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    /// `a * w mod q` given `w_shoup = shoup(w, q)`; requires `a < q`.
    #[inline]
    pub fn mul_shoup(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let hi = ((a as u128 * w_shoup as u128) >> 64) as u64;
        let r = a.wrapping_mul(w).wrapping_sub(hi.wrapping_mul(self.q));
        if r >= self.q {
            r - self.q
        } else {
            r
        }
    }

    pub fn pow(&self, base: u64, exp: u64) -> u64 {
        pow_mod(base, exp, self.q)
    }

    pub fn inv(&self, a: u64) -> u64 {
        inv_mod(a, self.q)
    }

    /// Signed representative in `(-q/2, q/2]`.
    #[inline]
    pub fn center(&self, a: u64) -> i64 {
        if a > self.q / 2 {
            a as i64 - self.q as i64
        } else {
            a as i64
        }
    }

    /// In-place negacyclic forward NTT (Cooley-Tukey, bit-reversed output).
    ///
    /// Harvey butterflies keep intermediates in `[0, 4q)`; `q < 2^62` keeps
    /// them below `2^64`. Input must be reduced; output is reduced.
    pub fn ntt_forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let (q, two_q) = (self.q, 2 * self.q);
        let n = self.n;
        let mut t = n;
        let mut m = 1;
        while m < n {
            t >>= 1;
            let (w_tab, ws_tab) = (&self.psi_rev[m..2 * m], &self.psi_rev_shoup[m..2 * m]);
            for (block, (&w, &ws)) in a.chunks_exact_mut(2 * t).zip(w_tab.iter().zip(ws_tab)) {
                let (lo, hi) = block.split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let mut u = *x;
                    if u >= two_q {
                        u -= two_q;
                    }
                    let v = mul_shoup_lazy(*y, w, ws, q);
                    *x = u + v;
                    *y = u + two_q - v;
                }
            }
            m <<= 1;
        }
        for x in a.iter_mut() {
            let mut v = *x;
            if v >= two_q {
                v -= two_q;
            }
            if v >= q {
                v -= q;
            }
            *x = v;
        }
    }

    /// In-place inverse of [`ntt_forward`](Self::ntt_forward) (Gentleman-Sande),
    /// with intermediates in `[0, 2q)`.
    pub fn ntt_inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let (q, two_q) = (self.q, 2 * self.q);
        let n = self.n;
        let mut t = 1;
        let mut m = n;
        while m > 1 {
            let h = m >> 1;
            let (w_tab, ws_tab) = (&self.psi_inv_rev[h..m], &self.psi_inv_rev_shoup[h..m]);
            for (block, (&w, &ws)) in a.chunks_exact_mut(2 * t).zip(w_tab.iter().zip(ws_tab)) {
                let (lo, hi) = block.split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (u, v) = (*x, *y);
                    let mut s = u + v;
                    if s >= two_q {
                        s -= two_q;
                    }
                    *x = s;
                    *y = mul_shoup_lazy(u + two_q - v, w, ws, q);
                }
            }
            t <<= 1;
            m = h;
        }
        let (ni, nis) = (self.n_inv, self.n_inv_shoup);
        for x in a.iter_mut() {
            let v = mul_shoup_lazy(*x, ni, nis, q);
            *x = if v >= q { v - q } else { v };
        }
    }
}

/// `a * w mod q` in `[0, 2q)` for any `a < 2^64`.
#[inline(always)]
fn mul_shoup_lazy(a: u64, w: u64, w_shoup: u64, q: u64) -> u64 {
    let hi = ((a as u128 * w_shoup as u128) >> 64) as u64;
    a.wrapping_mul(w).wrapping_sub(hi.wrapping_mul(q))
}
