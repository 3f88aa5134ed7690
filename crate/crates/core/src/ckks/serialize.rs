//! Binary encoding of keys and ciphertexts.
//!
//! ```text
//! file     := magic[8] digest[32] kind:u8 len:u64 payload[len]
//! magic    := "CKKS" 00 00 00 01
//! digest   := SHA-256 of the parameter set (CkksParams::digest)
//! kind     := 1 ciphertext | 2 secret key | 3 public key | 4 relin key
//!           | 5 galois key set | 6 plaintext
//! poly     := domain:u8 (0 coeff, 1 ntt) limbs:u32 n:u32 { modulus:u64 coeff:u64 * n } * limbs
//! ksk      := seed[32] digits:u32 poly * digits
//! payloads:
//!   ciphertext := level:u32 scale:f64 poly(c0) poly(c1)
//!   secret     := poly(s)
//!   public     := poly(b) poly(a)
//!   relin      := ksk
//!   galois     := count:u32 { index:i64 element:u64 ksk } * count
//!   plaintext  := level:u32 scale:f64 poly
//! ```
//! All integers are little-endian; `f64` is stored as its IEEE-754 bits.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::encoding::Plaintext;
use super::eval::Ciphertext;
use super::keys::{GaloisKey, GaloisKeySet, KeySwitchKey, PublicKey, RelinKey, SecretKey};
use super::params::CkksParams;
use crate::error::{Error, Result};
use crate::ring::{Domain, RingPoly};

pub const MAGIC: [u8; 8] = *b"CKKS\0\0\0\x01";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Kind {
    Ciphertext = 1,
    SecretKey = 2,
    PublicKey = 3,
    RelinKey = 4,
    GaloisKeys = 5,
    Plaintext = 6,
}

impl Kind {
    fn from_u8(b: u8) -> Result<Kind> {
        Ok(match b {
            1 => Kind::Ciphertext,
            2 => Kind::SecretKey,
            3 => Kind::PublicKey,
            4 => Kind::RelinKey,
            5 => Kind::GaloisKeys,
            6 => Kind::Plaintext,
            k => return Err(Error::Format(alloc::format!("unknown object kind {k}"))),
        })
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn poly(&mut self, p: &RingPoly) {
        self.u8(match p.domain() {
            Domain::Coefficient => 0,
            Domain::Ntt => 1,
        });
        self.u32(p.basis().len() as u32);
        self.u32(p.n() as u32);
        for (i, limb) in p.limbs().iter().enumerate() {
            self.u64(p.basis().modulus(i).value());
            for &c in limb {
                self.u64(c);
            }
        }
    }
    fn ksk(&mut self, k: &KeySwitchKey) {
        self.0.extend_from_slice(&k.seed);
        self.u32(k.b.len() as u32);
        for p in &k.b {
            self.poly(p);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Format(alloc::format!("truncated input: need {n} bytes at offset {}", self.pos))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    /// A polynomial whose moduli must equal `params.key_basis()` at the given positions.
    fn poly(&mut self, params: &CkksParams, positions: &[usize]) -> Result<RingPoly> {
        let domain = match self.u8()? {
            0 => Domain::Coefficient,
            1 => Domain::Ntt,
            d => return Err(Error::Format(alloc::format!("unknown domain tag {d}"))),
        };
        let limbs = self.u32()? as usize;
        let n = self.u32()? as usize;
        if limbs != positions.len() || n != params.n() {
            return Err(Error::Format(alloc::format!(
                "polynomial shape {limbs}x{n}, expected {}x{}",
                positions.len(),
                params.n()
            )));
        }
        let basis = params.key_basis().select(positions)?;
        let mut data = Vec::with_capacity(limbs);
        for i in 0..limbs {
            let q = self.u64()?;
            if q != basis.modulus(i).value() {
                return Err(Error::Format(alloc::format!(
                    "limb {i} modulus {q} does not match the parameter set"
                )));
            }
            let raw = self.take(8 * n)?;
            data.push(
                raw.chunks_exact(8)
                    .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect(),
            );
        }
        RingPoly::from_limbs(&basis, data, domain).map_err(|e| Error::Format(alloc::format!("{e}")))
    }

    fn ksk(&mut self, params: &CkksParams) -> Result<KeySwitchKey> {
        let seed: [u8; 32] = self.take(32)?.try_into().expect("32 bytes");
        let digits = self.u32()? as usize;
        if digits != params.dnum() {
            return Err(Error::Format(alloc::format!(
                "{digits} key-switching digits, parameters use {}",
                params.dnum()
            )));
        }
        let all: Vec<usize> = (0..params.key_basis().len()).collect();
        let b = (0..digits).map(|_| self.poly(params, &all)).collect::<Result<_>>()?;
        Ok(KeySwitchKey { b, seed })
    }
}

fn frame(params: &CkksParams, kind: Kind, payload: Writer) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.0.len() + 49);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(params.digest());
    out.push(kind as u8);
    out.extend_from_slice(&(payload.0.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload.0);
    out
}

fn unframe<'a>(params: &CkksParams, bytes: &'a [u8], want: Kind) -> Result<Reader<'a>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("bad magic: not a CKKS object".into()));
    }
    if r.take(32)? != params.digest() {
        return Err(Error::Format("parameter digest mismatch".into()));
    }
    let kind = Kind::from_u8(r.u8()?)?;
    if kind != want {
        return Err(Error::Format(alloc::format!("expected {want:?}, found {kind:?}")));
    }
    let len = r.u64()? as usize;
    if bytes.len() - r.pos != len {
        return Err(Error::Format(alloc::format!(
            "payload length {len} but {} bytes follow",
            bytes.len() - r.pos
        )));
    }
    Ok(Reader {
        buf: &bytes[r.pos..],
        pos: 0,
    })
}

fn finish(r: Reader<'_>) -> Result<()> {
    if r.pos != r.buf.len() {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    Ok(())
}

/// Kind byte of a serialized object, after checking magic and digest.
pub fn peek_kind(params: &CkksParams, bytes: &[u8]) -> Result<Kind> {
    if bytes.len() < 41 || bytes[..8] != MAGIC {
        return Err(Error::Format("bad magic: not a CKKS object".into()));
    }
    if &bytes[8..40] != params.digest() {
        return Err(Error::Format("parameter digest mismatch".into()));
    }
    Kind::from_u8(bytes[40])
}

fn prefix(level: usize) -> Vec<usize> {
    (0..=level).collect()
}

fn read_level(r: &mut Reader<'_>, params: &CkksParams) -> Result<(usize, f64)> {
    let level = r.u32()? as usize;
    if level > params.depth() {
        return Err(Error::Format(alloc::format!("level {level} above depth {}", params.depth())));
    }
    let scale = f64::from_bits(r.u64()?);
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Format(alloc::format!("invalid scale {scale}")));
    }
    Ok((level, scale))
}

pub fn ciphertext_to_bytes(params: &CkksParams, ct: &Ciphertext) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.u32(ct.level as u32);
    w.u64(ct.scale.to_bits());
    w.poly(&ct.c0);
    w.poly(&ct.c1);
    frame(params, Kind::Ciphertext, w)
}

pub fn ciphertext_from_bytes(params: &CkksParams, bytes: &[u8]) -> Result<Ciphertext> {
    let mut r = unframe(params, bytes, Kind::Ciphertext)?;
    let (level, scale) = read_level(&mut r, params)?;
    let c0 = r.poly(params, &prefix(level))?;
    let c1 = r.poly(params, &prefix(level))?;
    finish(r)?;
    Ok(Ciphertext { c0, c1, level, scale })
}

pub fn plaintext_to_bytes(params: &CkksParams, pt: &Plaintext) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.u32(pt.level as u32);
    w.u64(pt.scale.to_bits());
    w.poly(&pt.poly);
    frame(params, Kind::Plaintext, w)
}

pub fn plaintext_from_bytes(params: &CkksParams, bytes: &[u8]) -> Result<Plaintext> {
    let mut r = unframe(params, bytes, Kind::Plaintext)?;
    let (level, scale) = read_level(&mut r, params)?;
    let poly = r.poly(params, &prefix(level))?;
    finish(r)?;
    Ok(Plaintext { poly, scale, level })
}

pub fn secret_key_to_bytes(params: &CkksParams, sk: &SecretKey) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.poly(&sk.s);
    frame(params, Kind::SecretKey, w)
}

pub fn secret_key_from_bytes(params: &CkksParams, bytes: &[u8]) -> Result<SecretKey> {
    let mut r = unframe(params, bytes, Kind::SecretKey)?;
    let all: Vec<usize> = (0..params.key_basis().len()).collect();
    let s = r.poly(params, &all)?;
    finish(r)?;
    Ok(SecretKey { s })
}

pub fn public_key_to_bytes(params: &CkksParams, pk: &PublicKey) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.poly(&pk.b);
    w.poly(&pk.a);
    frame(params, Kind::PublicKey, w)
}

pub fn public_key_from_bytes(params: &CkksParams, bytes: &[u8]) -> Result<PublicKey> {
    let mut r = unframe(params, bytes, Kind::PublicKey)?;
    let q = prefix(params.depth());
    let b = r.poly(params, &q)?;
    let a = r.poly(params, &q)?;
    finish(r)?;
    Ok(PublicKey { b, a })
}

pub fn relin_key_to_bytes(params: &CkksParams, rk: &RelinKey) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.ksk(&rk.0);
    frame(params, Kind::RelinKey, w)
}

pub fn relin_key_from_bytes(params: &CkksParams, bytes: &[u8]) -> Result<RelinKey> {
    let mut r = unframe(params, bytes, Kind::RelinKey)?;
    let k = r.ksk(params)?;
    finish(r)?;
    Ok(RelinKey(k))
}

pub fn galois_keys_to_bytes(params: &CkksParams, gk: &GaloisKeySet) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.u32(gk.keys.len() as u32);
    for key in gk.keys.values() {
        w.u64(key.index as u64);
        w.u64(key.galois);
        w.ksk(&key.ksk);
    }
    frame(params, Kind::GaloisKeys, w)
}

pub fn galois_keys_from_bytes(params: &CkksParams, bytes: &[u8]) -> Result<GaloisKeySet> {
    let mut r = unframe(params, bytes, Kind::GaloisKeys)?;
    let count = r.u32()? as usize;
    let mut keys = BTreeMap::new();
    for _ in 0..count {
        let index = r.u64()? as i64;
        let galois = r.u64()?;
        if super::keys::normalize_rotation(index, params.slots()) != index
            || index == 0
            || galois != super::keys::galois_element(index, params.n())
        {
            return Err(Error::Format(alloc::format!(
                "rotation key {index} carries inconsistent Galois element {galois}"
            )));
        }
        let ksk = r.ksk(params)?;
        if keys.insert(index, GaloisKey { index, galois, ksk }).is_some() {
            return Err(Error::Format(alloc::format!("duplicate rotation key {index}")));
        }
    }
    finish(r)?;
    Ok(GaloisKeySet { keys })
}
