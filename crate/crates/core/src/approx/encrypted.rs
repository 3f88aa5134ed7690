use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::ChebyshevSeries;
use crate::backend::{require_level, Cv, HeBackend, ScaleTag};
use crate::error::{Error, Result};

/// Largest baby-step index plus one; giant steps are `T_{8·2^j}`.
const BABY: usize = 8;

/// Depth of `T_i` built by `T_i = 2·T_⌈i/2⌉·T_⌊i/2⌋ - T_{i mod 2}`.
fn cheb_depth(i: usize) -> usize {
    if i <= 1 {
        0
    } else {
        usize::BITS as usize - (i - 1).leading_zeros() as usize
    }
}

/// Smallest giant step `n = BABY·2^j` with `2n ≥ len`.
fn giant_for(len: usize) -> usize {
    let mut n = BABY;
    while 2 * n < len {
        n *= 2;
    }
    n
}

/// Splits `p = r + T_n·q` using `T_{n+j} = 2·T_n·T_j - T_{n-j}`.
fn split(c: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut r = c[..n].to_vec();
    let mut q = Vec::with_capacity(c.len() - n);
    q.push(c[n]);
    for j in 1..c.len() - n {
        q.push(2.0 * c[n + j]);
        r[n - j] -= c[n + j];
    }
    (r, q)
}

/// Levels consumed by the baby-step/giant-step body for `len` coefficients.
fn body_depth(len: usize) -> usize {
    if len <= 1 {
        0
    } else if len <= BABY {
        cheb_depth(len - 1) + 1
    } else {
        let n = giant_for(len);
        let q = len - n;
        let prod = cheb_depth(n).max(if q <= 1 { 0 } else { body_depth(q) }) + 1;
        body_depth(n).max(prod)
    }
}

/// Levels consumed by [`eval_series_encrypted`] on a degree-`degree` series:
/// one for the domain normalization plus the evaluation body.
pub fn series_depth(degree: usize) -> usize {
    if degree == 0 {
        0
    } else {
        1 + body_depth(degree + 1)
    }
}

enum Term<C> {
    Const(f64),
    Cipher(C),
}

struct Evaluator<'a, B: HeBackend> {
    b: &'a B,
    powers: BTreeMap<usize, Cv<B>>,
    mask: Option<&'a [f64]>,
}

impl<'a, B: HeBackend> Evaluator<'a, B> {
    fn power(&mut self, i: usize) -> Result<Cv<B>> {
        if let Some(t) = self.powers.get(&i) {
            return Ok(t.clone());
        }
        let (hi, lo) = (i - i / 2, i / 2);
        let a = self.power(hi)?;
        let b = self.power(lo)?;
        let p = self.b.mul(&a, &b)?;
        let p2 = self.b.add(&p, &p)?;
        let t = if hi == lo {
            self.b.add_const(&p2, -1.0)?
        } else {
            let t1 = self.power(1)?;
            self.b.sub(&p2, &t1)?
        };
        self.powers.insert(i, t.clone());
        Ok(t)
    }

    /// `c · T_i` with the mask folded into the plaintext.
    fn scaled(&mut self, i: usize, c: f64) -> Result<Cv<B>> {
        let t = self.power(i)?;
        match self.mask {
            None => self.b.mul_const(&t, c),
            Some(m) => {
                let v: Vec<f64> = m.iter().map(|x| x * c).collect();
                self.b.mul_values(&t, &v)
            }
        }
    }

    fn add_constant(&self, ct: &Cv<B>, c: f64) -> Result<Cv<B>> {
        match self.mask {
            None => self.b.add_const(ct, c),
            Some(m) => {
                let v: Vec<f64> = m.iter().map(|x| x * c).collect();
                self.b.add_values(ct, &v)
            }
        }
    }

    fn eval(&mut self, c: &[f64]) -> Result<Term<Cv<B>>> {
        if c.len() == 1 {
            return Ok(Term::Const(c[0]));
        }
        if c.len() <= BABY {
            let mut acc = self.scaled(1, c[1])?;
            for (i, &ci) in c.iter().enumerate().skip(2) {
                let term = self.scaled(i, ci)?;
                acc = self.b.add(&acc, &term)?;
            }
            return Ok(Term::Cipher(self.add_constant(&acc, c[0])?));
        }
        let n = giant_for(c.len());
        let (r, q) = split(c, n);
        let prod = match self.eval(&q)? {
            Term::Const(k) => self.scaled(n, k)?,
            Term::Cipher(qc) => {
                let tn = self.power(n)?;
                self.b.mul(&tn, &qc)?
            }
        };
        Ok(Term::Cipher(match self.eval(&r)? {
            Term::Const(k) => self.add_constant(&prod, k)?,
            Term::Cipher(rc) => self.b.add(&rc, &prod)?,
        }))
    }
}

/// Slot-wise `Σ c_n T_n(x)`.
///
/// The input is read as the series variable on `[-1, 1]` regardless of its
/// scale tag; the output is `Natural`. The level drops by exactly
/// `series.depth()`. With `mask`, every coefficient is multiplied slot-wise by
/// it, so slots where `mask` is 0 decrypt to 0.
pub fn eval_series_encrypted<B: HeBackend>(
    b: &B,
    x: &Cv<B>,
    series: &ChebyshevSeries,
    mask: Option<&[f64]>,
) -> Result<Cv<B>> {
    let depth = series.depth();
    require_level("chebyshev_series", x.level(), depth)?;
    if let Some(m) = mask {
        if m.len() > b.slots() {
            return Err(Error::Capacity(alloc::format!("mask of {} slots exceeds {}", m.len(), b.slots())));
        }
    }
    let c = series.coeffs();
    let x = x.clone().with_tag(ScaleTag::Natural);
    if c.len() == 1 {
        let zero = b.zero(x.level());
        return Evaluator { b, powers: BTreeMap::new(), mask }.add_constant(&zero, c[0]);
    }
    // affine map of the series domain [-1, 1] onto itself
    let (lo, hi) = (-1.0f64, 1.0f64);
    let mut t1 = b.mul_const(&x, 2.0 / (hi - lo))?;
    let shift = -(hi + lo) / (hi - lo);
    if shift != 0.0 {
        t1 = b.add_const(&t1, shift)?;
    }
    let mut ev = Evaluator {
        b,
        powers: BTreeMap::new(),
        mask,
    };
    ev.powers.insert(1, t1);
    let out = match ev.eval(c)? {
        Term::Cipher(ct) => ct,
        Term::Const(k) => ev.add_constant(&b.zero(x.level() - depth), k)?,
    };
    debug_assert_eq!(out.level(), x.level() - depth);
    Ok(out)
}

/// Multiplies by `1/scale_value` (one level) and records the scale in the tag.
pub fn scale_to_interval<B: HeBackend>(b: &B, x: &Cv<B>, scale_value: f64) -> Result<Cv<B>> {
    if !(scale_value > 0.0 && scale_value.is_finite()) {
        return Err(Error::Domain(alloc::format!("scale value {scale_value} must be positive")));
    }
    let tag = match x.tag() {
        ScaleTag::Natural => ScaleTag::Scaled(scale_value),
        ScaleTag::Scaled(s) => ScaleTag::Scaled(s * scale_value),
    };
    Ok(b.mul_const(x, 1.0 / scale_value)?.with_tag(tag))
}

#[cfg(test)]
mod tests {
    use super::super::{clenshaw, fit_step};
    use super::*;
    use crate::backend::{SimBackend, SimConfig};
    use crate::ring::unit_f64;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn sim(depth: usize) -> SimBackend {
        SimBackend::new(SimConfig::new(256, depth)).unwrap()
    }

    #[test]
    fn depth_is_a_function_of_degree() {
        assert_eq!(series_depth(50), 7);
        assert_eq!(series_depth(0), 0);
        for d in 1..=127usize {
            let optimal = usize::BITS as usize - d.leading_zeros() as usize; // ⌈log2(d+1)⌉
            assert!(series_depth(d) <= optimal + 2, "degree {d}");
            assert!(series_depth(d) >= series_depth(d - 1));
        }
    }

    #[test]
    fn consumed_levels_match_and_values_agree() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let x: Vec<f64> = (0..256).map(|_| 2.0 * unit_f64(&mut rng) - 1.0).collect();
        for degree in 1..=64usize {
            let c: Vec<f64> = (0..=degree).map(|_| (unit_f64(&mut rng) - 0.5) / (degree as f64)).collect();
            let s = ChebyshevSeries::new(c.clone(), 0.0).unwrap();
            let b = sim(12);
            let ct = b.encrypt(&x, 12).unwrap();
            let out = eval_series_encrypted(&b, &ct, &s, None).unwrap();
            assert_eq!(out.level(), 12 - series_depth(degree), "degree {degree}");
            let got = b.decrypt(&out).unwrap();
            for (g, &xi) in got.iter().zip(&x) {
                assert!((g - clenshaw(&c, xi)).abs() < 1e-9, "degree {degree}");
            }
        }
    }

    #[test]
    fn constant_series_uses_no_levels() {
        let b = sim(3);
        let ct = b.encrypt(&[0.3, -0.7], 2).unwrap();
        let s = ChebyshevSeries::new(alloc::vec![1.0], 0.0).unwrap();
        let out = eval_series_encrypted(&b, &ct, &s, None).unwrap();
        assert_eq!(out.level(), 2);
        assert!(b.decrypt(&out).unwrap().iter().all(|&v| v == 1.0));
        assert_eq!(b.meter().snapshot().mul + b.meter().snapshot().mul_const, 0);
    }

    #[test]
    fn mask_zeroes_padding_slots() {
        let b = sim(9);
        let s = fit_step(0.0625, 50).unwrap();
        let mut mask = alloc::vec![0.0; 256];
        mask[..10].iter_mut().for_each(|m| *m = 1.0);
        let x: Vec<f64> = (0..256).map(|i| (i as f64 / 128.0) - 1.0).collect();
        let out = eval_series_encrypted(&b, &b.encrypt(&x, 9).unwrap(), &s, Some(&mask)).unwrap();
        assert_eq!(out.level(), 2);
        let got = b.decrypt(&out).unwrap();
        assert!(got[10..].iter().all(|&v| v.abs() < 1e-12));
        for i in 0..10 {
            assert!((got[i] - s.eval(x[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn insufficient_level_names_required_depth() {
        let b = sim(9);
        let s = fit_step(0.0, 50).unwrap();
        let ct = b.encrypt(&[0.1], 6).unwrap();
        assert!(matches!(
            eval_series_encrypted(&b, &ct, &s, None),
            Err(Error::LevelExhausted { required: 7, available: 6, .. })
        ));
    }

    #[test]
    fn scaling_examples() {
        let b = sim(3);
        let ct = b.encrypt(&[-8.0, 4.0, 8.0], 3).unwrap();
        let s = scale_to_interval(&b, &ct, 8.0).unwrap();
        assert_eq!(s.level(), 2);
        assert_eq!(s.tag(), ScaleTag::Scaled(8.0));
        assert_eq!(&b.decrypt(&s).unwrap()[..3], &[-1.0, 0.5, 1.0]);
        let one = scale_to_interval(&b, &ct, 1.0).unwrap();
        assert_eq!(&b.decrypt(&one).unwrap()[..3], &[-8.0, 4.0, 8.0]);
        assert!(matches!(scale_to_interval(&b, &ct, 0.0), Err(Error::Domain(_))));
        assert!(matches!(scale_to_interval(&b, &ct, -2.0), Err(Error::Domain(_))));
    }
}
