//! Network descriptions, weights and datasets on disk.

pub mod idx;
pub mod spkf;
pub mod weights;

use std::fs;
use std::path::{Path, PathBuf};

use snnhe_core::layers::Tensor;
use snnhe_core::network::NetworkSpec;

use crate::error::{format_err, Error, Result};

pub use weights::{load_weights_csv, save_weights_csv, series_from_csv, series_to_csv};

/// One input: a frame per timestep and an optional class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub frames: Vec<Tensor>,
    pub label: Option<usize>,
}

/// Network descriptions shipped with the crate, by name.
pub const SHIPPED_NETWORKS: [(&str, &str); 6] = [
    ("lenet5-mnist", include_str!("../../../../networks/lenet5-mnist.json")),
    ("lenet5-nmnist", include_str!("../../../../networks/lenet5-nmnist.json")),
    ("resnet19-cifar10", include_str!("../../../../networks/resnet19-cifar10.json")),
    ("resnet19-cifar10dvs", include_str!("../../../../networks/resnet19-cifar10dvs.json")),
    ("tiny", include_str!("../../../../networks/tiny.json")),
    ("lenet-tiny", include_str!("../../../../networks/lenet-tiny.json")),
];

/// Parses and shape-checks a JSON network description.
pub fn parse_network(text: &str) -> snnhe_core::Result<NetworkSpec> {
    let net: NetworkSpec =
        serde_json::from_str(text).map_err(|e| snnhe_core::Error::Validation(format!("network description: {e}")))?;
    net.validate()?;
    Ok(net)
}

pub fn shipped_network(name: &str) -> Option<NetworkSpec> {
    SHIPPED_NETWORKS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| parse_network(text).expect("shipped networks are valid"))
}

/// Loads a network from a JSON file, or by shipped name when no such file exists.
pub fn load_network(arg: &str) -> Result<NetworkSpec> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(net) = shipped_network(arg) {
            return Ok(net);
        }
    }
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    parse_network(&text).map_err(Error::in_file(path))
}

pub fn save_network(path: &Path, net: &NetworkSpec) -> Result<()> {
    let text = serde_json::to_string_pretty(net).map_err(|source| Error::Json { path: path.into(), source })?;
    fs::write(path, text + "\n").map_err(Error::io(path))
}

/// Sibling labels file of an IDX images file, by the usual MNIST naming.
fn idx_labels_path(images: &Path) -> Option<PathBuf> {
    let name = images.file_name()?.to_str()?;
    let guess = name.replace("images-idx3", "labels-idx1").replace("images", "labels");
    (guess != name).then(|| images.with_file_name(guess)).filter(|p| p.exists())
}

/// Reads an IDX images file (plus its sibling labels file, if present) or
/// an SPKF file, telling them apart by their leading bytes. IDX images are
/// replicated over `timesteps`.
pub fn read_dataset(path: &Path, timesteps: usize) -> Result<Vec<Sample>> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    if bytes.starts_with(b"SPKF") {
        return Ok(spkf::parse(&bytes).map_err(Error::in_file(path))?.samples());
    }
    if bytes.starts_with(&idx::IMAGES_MAGIC.to_be_bytes()) {
        let images = idx::parse_images(&bytes).map_err(Error::in_file(path))?;
        let labels = match idx_labels_path(path) {
            Some(lp) => {
                let lb = fs::read(&lp).map_err(Error::io(&lp))?;
                Some(idx::parse_labels(&lb).map_err(Error::in_file(&lp))?)
            }
            None => None,
        };
        return idx::samples(images, labels, timesteps).map_err(Error::in_file(path));
    }
    Err(Error::in_file(path)(format_err("neither an IDX images file nor an SPKF file")))
}

/// MNIST-style reader taking both paths explicitly.
pub fn read_mnist_idx(images: &Path, labels: &Path, timesteps: usize) -> Result<Vec<Sample>> {
    let ib = fs::read(images).map_err(Error::io(images))?;
    let lb = fs::read(labels).map_err(Error::io(labels))?;
    let imgs = idx::parse_images(&ib).map_err(Error::in_file(images))?;
    let labs = idx::parse_labels(&lb).map_err(Error::in_file(labels))?;
    idx::samples(imgs, Some(labs), timesteps).map_err(Error::in_file(images))
}

pub fn read_frames_bin(path: &Path) -> Result<Vec<Sample>> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    Ok(spkf::parse(&bytes).map_err(Error::in_file(path))?.samples())
}

pub fn write_frames_bin(path: &Path, samples: &[Sample]) -> Result<()> {
    let f = spkf::Spkf::from_samples(samples).map_err(Error::in_file(path))?;
    fs::write(path, f.to_bytes()).map_err(Error::io(path))
}
