//! Encrypted SIMD vectors behind one interface.
//!
//! [`HeBackend`] is implemented by the real scheme ([`CkksBackend`]) and by an
//! exact slot simulator ([`SimBackend`]). Both follow the same level ledger:
//! level `ℓ` is the number of multiplications a vector can still absorb,
//! every multiplication consumes one, and binary operations first lower the
//! higher operand to the lower level.

mod ckks;
mod meter;
mod sim;

use alloc::vec::Vec;
use core::fmt::Debug;

pub use self::ckks::CkksBackend;
pub use meter::{Meter, OpCounts};
pub use sim::{SimBackend, SimConfig};

use crate::error::{Error, Result};

/// Which interpretation the slot values carry.
///
/// `Scaled(s)` values are natural values divided by `s`. Sums require equal
/// tags; in a product a `Natural` operand adopts the other operand's tag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleTag {
    Natural,
    Scaled(f64),
}

impl ScaleTag {
    pub fn sum(self, other: ScaleTag) -> Result<ScaleTag> {
        if self == other {
            Ok(self)
        } else {
            Err(Error::DomainMismatch(alloc::format!(
                "cannot add {self:?} and {other:?} operands"
            )))
        }
    }

    pub fn product(self, other: ScaleTag) -> Result<ScaleTag> {
        match (self, other) {
            (ScaleTag::Natural, t) | (t, ScaleTag::Natural) => Ok(t),
            _ => Err(Error::DomainMismatch(alloc::format!(
                "product of two scaled operands {self:?} and {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Ckks,
    Sim,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::Ckks => "ckks",
            BackendKind::Sim => "sim",
        }
    }
}

impl core::str::FromStr for BackendKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ckks" => Ok(BackendKind::Ckks),
            "sim" => Ok(BackendKind::Sim),
            _ => Err(Error::Validation(alloc::format!("unknown backend {s:?} (expected ckks or sim)"))),
        }
    }
}

/// One encrypted vector of `slots` reals.
#[derive(Debug, Clone)]
pub struct CipherVector<P> {
    payload: P,
    slots: usize,
    level: usize,
    tag: ScaleTag,
}

impl<P> CipherVector<P> {
    pub(crate) fn new(payload: P, slots: usize, level: usize, tag: ScaleTag) -> Self {
        CipherVector {
            payload,
            slots,
            level,
            tag,
        }
    }
    pub fn payload(&self) -> &P {
        &self.payload
    }
    pub fn slots(&self) -> usize {
        self.slots
    }
    pub fn level(&self) -> usize {
        self.level
    }
    pub fn tag(&self) -> ScaleTag {
        self.tag
    }
    /// Reinterprets the slot values without touching them.
    pub fn with_tag(mut self, tag: ScaleTag) -> Self {
        self.tag = tag;
        self
    }
}

pub type Cv<B> = CipherVector<<B as HeBackend>::Payload>;

/// Homomorphic operations on [`CipherVector`]s.
///
/// Contracts shared by every implementation:
/// - `mul`, `mul_plain` and `mul_const` consume one level and fail with
///   `LevelExhausted` at level 0;
/// - `add`, `sub` and `mul` align operands to the lower level first;
/// - `rotate(k)` moves slot `i + k` into slot `i` and needs a key for `k`;
/// - `refresh` and `exact_compare` return vectors at `depth()`;
/// - `exact_compare` yields `1` where `value ≤ threshold`, else `0`.
pub trait HeBackend: Send + Sync {
    type Payload: Clone + Debug + Send + Sync;
    /// Encoded plaintext bound to one level.
    type Plain: Clone + Debug + Send + Sync;
    /// Running sum of plaintext products that has not consumed its level yet.
    type Acc: Debug + Send;

    fn kind(&self) -> BackendKind;
    fn slots(&self) -> usize;
    fn depth(&self) -> usize;
    fn meter(&self) -> &Meter;

    fn encrypt(&self, values: &[f64], level: usize) -> Result<Cv<Self>>;
    fn decrypt(&self, cv: &Cv<Self>) -> Result<Vec<f64>>;
    fn encode(&self, values: &[f64], level: usize) -> Result<Self::Plain>;
    fn plain_level(&self, pt: &Self::Plain) -> usize;
    /// Trivial encryption of zero at `level`.
    fn zero(&self, level: usize) -> Cv<Self>;

    fn add(&self, a: &Cv<Self>, b: &Cv<Self>) -> Result<Cv<Self>>;
    fn sub(&self, a: &Cv<Self>, b: &Cv<Self>) -> Result<Cv<Self>>;
    fn negate(&self, a: &Cv<Self>) -> Cv<Self>;
    fn add_plain(&self, a: &Cv<Self>, pt: &Self::Plain) -> Result<Cv<Self>>;
    fn add_const(&self, a: &Cv<Self>, c: f64) -> Result<Cv<Self>>;
    fn mul_plain(&self, a: &Cv<Self>, pt: &Self::Plain) -> Result<Cv<Self>>;
    fn mul_const(&self, a: &Cv<Self>, c: f64) -> Result<Cv<Self>>;
    fn mul(&self, a: &Cv<Self>, b: &Cv<Self>) -> Result<Cv<Self>>;
    /// Adds `a ⊙ values` to `acc`. Every term of one accumulator must share
    /// `a`'s level and tag. Counts as one encode, one `mul_plain` and, for a
    /// non-empty `acc`, one `add`.
    fn mul_acc(&self, acc: Option<Self::Acc>, a: &Cv<Self>, values: &[f64]) -> Result<Self::Acc>;
    /// Closes an accumulator, consuming one level.
    fn finish_acc(&self, acc: Self::Acc) -> Result<Cv<Self>>;
    fn rotate(&self, a: &Cv<Self>, k: i64) -> Result<Cv<Self>>;
    fn has_rotation(&self, k: i64) -> bool;
    fn level_down(&self, a: &Cv<Self>, level: usize) -> Result<Cv<Self>>;
    fn refresh(&self, a: &Cv<Self>) -> Result<Cv<Self>>;
    fn exact_compare(&self, values: &Cv<Self>, thresholds: &Cv<Self>) -> Result<Cv<Self>>;

    /// Bytes a serialized ciphertext at this level occupies.
    fn byte_size(&self, a: &Cv<Self>) -> usize;
    fn digest(&self, a: &Cv<Self>) -> [u8; 32];

    fn add_values(&self, a: &Cv<Self>, values: &[f64]) -> Result<Cv<Self>> {
        let pt = self.encode(values, a.level())?;
        self.add_plain(a, &pt)
    }

    fn mul_values(&self, a: &Cv<Self>, values: &[f64]) -> Result<Cv<Self>> {
        require_level("mul_plain", a.level(), 1)?;
        let pt = self.encode(values, a.level())?;
        self.mul_plain(a, &pt)
    }

    /// Encrypts `values` at full depth.
    fn encrypt_fresh(&self, values: &[f64]) -> Result<Cv<Self>> {
        self.encrypt(values, self.depth())
    }
}

pub(crate) fn require_level(op: &'static str, available: usize, required: usize) -> Result<()> {
    if available < required {
        Err(Error::LevelExhausted {
            op,
            required,
            available,
        })
    } else {
        Ok(())
    }
}

pub(crate) fn check_values(values: &[f64], slots: usize) -> Result<()> {
    if values.len() > slots {
        return Err(Error::Capacity(alloc::format!(
            "{} values exceed {slots} slots",
            values.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(alloc::format!("non-finite slot value {v}")));
    }
    Ok(())
}
