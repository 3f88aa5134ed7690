use alloc::vec::Vec;

use super::keys::{expand_a, KeySwitchKey};
use super::params::CkksParams;
use crate::ring::{shoup, Domain, PrimeModulus, RingPoly};

/// Fast base conversion of the residues `src` (over the moduli `from`)
/// into modulus `to`. Exact up to an additive multiple of `∏ from`.
struct BaseConverter {
    /// `(∏_{i'≠i} q_{i'})^{-1} mod q_i`
    hat_inv: Vec<u64>,
}

impl BaseConverter {
    fn new(from: &[&PrimeModulus]) -> Self {
        let hat_inv = from
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let hat = from
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != i)
                    .fold(1u64, |acc, (_, o)| m.mul(acc, m.reduce(o.value())));
                m.inv(hat)
            })
            .collect();
        BaseConverter { hat_inv }
    }

    /// `y_i = x_i · hat_inv_i mod q_i`, computed once per source set.
    fn scaled(&self, from: &[&PrimeModulus], src: &[&[u64]]) -> Vec<Vec<u64>> {
        from.iter()
            .zip(src)
            .zip(&self.hat_inv)
            .map(|((m, x), &h)| {
                let hs = shoup(h, m.value());
                x.iter().map(|&c| m.mul_shoup(c, h, hs)).collect()
            })
            .collect()
    }

    fn convert(from: &[&PrimeModulus], scaled: &[Vec<u64>], to: &PrimeModulus) -> Vec<u64> {
        let hat_to: Vec<u64> = (0..from.len())
            .map(|i| {
                from.iter()
                    .enumerate()
                    .filter(|&(k, _)| k != i)
                    .fold(1u64, |acc, (_, o)| to.mul(acc, to.reduce(o.value())))
            })
            .collect();
        let n = scaled[0].len();
        (0..n)
            .map(|c| {
                let mut acc: u128 = 0;
                for (y, &h) in scaled.iter().zip(&hat_to) {
                    acc += y[c] as u128 * h as u128;
                }
                to.reduce_u128(acc)
            })
            .collect()
    }
}

/// Applies `ksk` to `d` over `q_0..=q_level`, given in the coefficient
/// domain and, as `d_ntt`, in the NTT domain.
///
/// Returns `(k0, k1)` in the NTT domain over the same basis with
/// `k0 + k1·s ≈ d·s'`.
pub(crate) fn key_switch(
    params: &CkksParams,
    ksk: &KeySwitchKey,
    d: &RingPoly,
    d_ntt: &RingPoly,
    level: usize,
) -> (RingPoly, RingPoly) {
    debug_assert_eq!(d.domain(), Domain::Coefficient);
    debug_assert_eq!(d_ntt.domain(), Domain::Ntt);
    let kb = params.key_basis();
    let depth = params.depth();
    let n = params.n();
    let n_special = params.p_basis().len();
    let targets: Vec<usize> = (0..=level).chain(depth + 1..depth + 1 + n_special).collect();
    let mut acc0 = alloc::vec![alloc::vec![0u64; n]; targets.len()];
    let mut acc1 = alloc::vec![alloc::vec![0u64; n]; targets.len()];

    for j in 0..params.dnum() {
        let digit = params.digit(j, level);
        if digit.is_empty() {
            continue;
        }
        let from: Vec<&PrimeModulus> = digit.clone().map(|i| kb.modulus(i)).collect();
        let src: Vec<&[u64]> = digit.clone().map(|i| d.limb(i)).collect();
        let conv = BaseConverter::new(&from);
        let scaled = conv.scaled(&from, &src);
        for (ti, &t) in targets.iter().enumerate() {
            let m = kb.modulus(t);
            let converted;
            let x: &[u64] = if digit.contains(&t) {
                d_ntt.limb(t)
            } else {
                let mut c = BaseConverter::convert(&from, &scaled, m);
                m.ntt_forward(&mut c);
                converted = c;
                &converted
            };
            let b = ksk.b[j].limb(t);
            let a = expand_a(params, &ksk.seed, j, t);
            let (r0, r1) = (&mut acc0[ti], &mut acc1[ti]);
            for c in 0..n {
                r0[c] = m.add(r0[c], m.mul(x[c], b[c]));
                r1[c] = m.add(r1[c], m.mul(x[c], a[c]));
            }
        }
    }
    let basis = params.basis_at(level);
    (
        RingPoly::from_parts_unchecked(basis.clone(), mod_down(params, acc0, level), Domain::Ntt),
        RingPoly::from_parts_unchecked(basis, mod_down(params, acc1, level), Domain::Ntt),
    )
}

/// Divides an NTT-domain value over `q_0..=q_level ∪ P` by `P`.
fn mod_down(params: &CkksParams, mut acc: Vec<Vec<u64>>, level: usize) -> Vec<Vec<u64>> {
    let kb = params.key_basis();
    let depth = params.depth();
    let n_special = params.p_basis().len();
    let specials: Vec<&PrimeModulus> = (0..n_special).map(|t| kb.modulus(depth + 1 + t)).collect();
    let mut p_part = acc.split_off(level + 1);
    for (m, limb) in specials.iter().zip(p_part.iter_mut()) {
        m.ntt_inverse(limb);
    }
    let src: Vec<&[u64]> = p_part.iter().map(|l| l.as_slice()).collect();
    let conv = BaseConverter::new(&specials);
    let scaled = conv.scaled(&specials, &src);
    for (i, limb) in acc.iter_mut().enumerate() {
        let m = kb.modulus(i);
        let mut r = BaseConverter::convert(&specials, &scaled, m);
        m.ntt_forward(&mut r);
        let p_mod = specials
            .iter()
            .fold(1u64, |a, p| m.mul(a, m.reduce(p.value())));
        let p_inv = m.inv(p_mod);
        let p_inv_s = shoup(p_inv, m.value());
        for (x, &y) in limb.iter_mut().zip(&r) {
            *x = m.mul_shoup(m.sub(*x, y), p_inv, p_inv_s);
        }
    }
    acc
}
