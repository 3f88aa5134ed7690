//! Key directories: serialized key objects plus a JSON manifest.
//!
//! `secret.key`, `public.key` and `relin.key` are always written;
//! `galois.key` only when the network needs rotations.

use std::fs;
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use snnhe_core::ckks::serialize as ser;
use snnhe_core::ckks::{keygen, CkksParams, GaloisKeySet, KeySet};
use snnhe_core::network::NetworkSpec;
use snnhe_core::planner::{harvest_rotations, RotationPlan};

use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyFile {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyManifest {
    pub profile: String,
    pub network: String,
    pub seed: u64,
    pub rotation_indices: Vec<i64>,
    pub files: Vec<KeyFile>,
}

impl KeyManifest {
    pub fn total_bytes(&self) -> usize {
        self.files.iter().map(|f| f.bytes).sum()
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Keys for every rotation `net` needs under `params`, from a seeded generator.
pub fn generate(params: &CkksParams, net: &NetworkSpec, seed: u64) -> Result<(RotationPlan, KeySet)> {
    let plan = harvest_rotations(net, params.slots())?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let keys = keygen(params, &plan.to_vec(), &mut rng)?;
    Ok((plan, keys))
}

pub fn save(dir: &Path, params: &CkksParams, net: &NetworkSpec, seed: u64, keys: &KeySet) -> Result<KeyManifest> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let mut objects = vec![
        ("secret.key", ser::secret_key_to_bytes(params, &keys.secret)),
        ("public.key", ser::public_key_to_bytes(params, &keys.public)),
        ("relin.key", ser::relin_key_to_bytes(params, &keys.relin)),
    ];
    if !keys.galois.is_empty() {
        objects.push(("galois.key", ser::galois_keys_to_bytes(params, &keys.galois)));
    }
    let mut files = Vec::with_capacity(objects.len());
    for (name, bytes) in objects {
        let path = dir.join(name);
        fs::write(&path, &bytes).map_err(Error::io(&path))?;
        files.push(KeyFile { name: name.into(), bytes: bytes.len(), sha256: sha256_hex(&bytes) });
    }
    let manifest = KeyManifest {
        profile: params.name().into(),
        network: net.name.clone(),
        seed,
        rotation_indices: keys.galois.indices(),
        files,
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).map_err(|source| Error::Json { path: path.clone(), source })?;
    fs::write(&path, text + "\n").map_err(Error::io(&path))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<KeyManifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(Error::io(&path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path, source })
}

/// Loads a key directory, checking every file against the manifest digest.
pub fn load(dir: &Path) -> Result<(CkksParams, KeySet, KeyManifest)> {
    let manifest = read_manifest(dir)?;
    let params = CkksParams::by_name(&manifest.profile)?;
    let read = |name: &str| -> Result<Vec<u8>> {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(Error::io(&path))?;
        let listed = manifest.files.iter().find(|f| f.name == name);
        if listed.map(|f| f.sha256.as_str()) != Some(sha256_hex(&bytes).as_str()) {
            return Err(Error::in_file(&path)(snnhe_core::Error::Format("digest differs from the manifest".into())));
        }
        Ok(bytes)
    };
    let p = &params;
    let secret = ser::secret_key_from_bytes(p, &read("secret.key")?).map_err(Error::in_file(dir.join("secret.key")))?;
    let public = ser::public_key_from_bytes(p, &read("public.key")?).map_err(Error::in_file(dir.join("public.key")))?;
    let relin = ser::relin_key_from_bytes(p, &read("relin.key")?).map_err(Error::in_file(dir.join("relin.key")))?;
    let galois = if manifest.rotation_indices.is_empty() {
        GaloisKeySet::default()
    } else {
        ser::galois_keys_from_bytes(p, &read("galois.key")?).map_err(Error::in_file(dir.join("galois.key")))?
    };
    Ok((params, KeySet { secret, public, relin, galois }, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::shipped_network;

    #[test]
    fn roundtrip_and_determinism() {
        let params = CkksParams::test().unwrap();
        let net = shipped_network("tiny").unwrap();
        let (plan, keys) = generate(&params, &net, 5).unwrap();
        assert_eq!(keys.galois.indices(), plan.to_vec());
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = save(a.path(), &params, &net, 5, &keys).unwrap();
        let mb = save(b.path(), &params, &net, 5, &generate(&params, &net, 5).unwrap().1).unwrap();
        assert_eq!(ma, mb);
        let (p, k, m) = load(a.path()).unwrap();
        assert_eq!(p.digest(), params.digest());
        assert_eq!(k.galois.indices(), plan.to_vec());
        assert_eq!(m, ma);
    }

    #[test]
    fn empty_network_has_no_rotation_file() {
        let params = CkksParams::test().unwrap();
        let mut net = shipped_network("tiny").unwrap();
        net.layers.clear();
        let (_, keys) = generate(&params, &net, 1).unwrap();
        let d = tempfile::tempdir().unwrap();
        let m = save(d.path(), &params, &net, 1, &keys).unwrap();
        let names: Vec<_> = m.files.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["secret.key", "public.key", "relin.key"]);
        assert!(load(d.path()).unwrap().1.galois.is_empty());
    }

    #[test]
    fn tampered_or_missing_files_are_rejected() {
        let params = CkksParams::test().unwrap();
        let net = shipped_network("tiny").unwrap();
        let (_, keys) = generate(&params, &net, 2).unwrap();
        let d = tempfile::tempdir().unwrap();
        save(d.path(), &params, &net, 2, &keys).unwrap();
        let g = d.path().join("galois.key");
        let mut bytes = fs::read(&g).unwrap();
        *bytes.last_mut().unwrap() ^= 1;
        fs::write(&g, bytes).unwrap();
        assert_eq!(load(d.path()).unwrap_err().exit_code(), 2);
        fs::remove_file(&g).unwrap();
        assert!(matches!(load(d.path()), Err(Error::Io { .. })));
    }
}
