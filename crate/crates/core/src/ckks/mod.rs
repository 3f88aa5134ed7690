//! Leveled RNS-CKKS: encoding, keys, encryption and homomorphic operations.

mod authority;
mod encoding;
mod eval;
mod keys;
mod keyswitch;
mod params;
pub mod serialize;

pub use authority::RecryptionAuthority;
pub use encoding::{Encoder, Plaintext};
pub use eval::{Ciphertext, CkksContext};
pub use keys::{
    galois_element, gen_galois_keys, gen_public_key, gen_relin_key, gen_secret_key, keygen,
    normalize_rotation, GaloisKey, GaloisKeySet, KeySet, KeySwitchKey, PublicKey, RelinKey,
    SecretKey,
};
pub use params::{CkksParams, BASE_PRIME_BITS, ERROR_STDDEV, SPECIAL_PRIME_BITS};
