//! Dataset ingestion, preprocessing to `[1, 28, 28]` in `[−1, 1]`, and the
//! one-class-per-client split.

pub mod cifar;
pub mod idx;
pub mod preprocess;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

pub use cifar::{load_cifar10, parse_cifar10, CifarRecord};
pub use idx::{load_idx_images, load_idx_labels, parse_idx_images, parse_idx_labels, GrayImage};
pub use preprocess::{byte_to_unit, preprocess_gray, preprocess_rgb, unit_to_byte};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const NUM_CLASSES: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImage {
    pub pixels: Tensor,
    pub label: usize,
}

/// The private data of one benign client: samples of a single class.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub owner_class: usize,
    pub samples: Vec<LabeledImage>,
    /// Positions of `samples` in the dataset they were drawn from.
    pub source_indices: Vec<usize>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    Mnist,
    FashionMnist,
    Cifar10,
}

impl DatasetKind {
    pub fn dir_name(self) -> &'static str {
        match self {
            DatasetKind::Mnist => "mnist",
            DatasetKind::FashionMnist => "fashion_mnist",
            DatasetKind::Cifar10 => "cifar10",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mnist" => Ok(DatasetKind::Mnist),
            "fashion_mnist" => Ok(DatasetKind::FashionMnist),
            "cifar10" => Ok(DatasetKind::Cifar10),
            other => Err(format!("unknown dataset `{other}` (mnist | fashion_mnist | cifar10)")),
        }
    }
}

fn require(path: PathBuf) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::Data(format!("missing data file {}", path.display())))
    }
}

fn load_idx_split(dir: &Path, prefix: &str) -> Result<Vec<LabeledImage>> {
    let images = load_idx_images(require(dir.join(format!("{prefix}-images-idx3-ubyte")))?)?;
    let labels_path = require(dir.join(format!("{prefix}-labels-idx1-ubyte")))?;
    let labels = load_idx_labels(&labels_path)?;
    if images.len() != labels.len() {
        return Err(Error::Parse {
            source_name: labels_path.display().to_string(),
            offset: 8,
            reason: format!("{} labels for {} images", labels.len(), images.len()),
        });
    }
    images
        .iter()
        .zip(labels)
        .map(|(img, label)| {
            if label as usize >= NUM_CLASSES {
                return Err(Error::Data(format!("label {label} out of range in {}", labels_path.display())));
            }
            Ok(LabeledImage {
                pixels: preprocess_gray(img)?,
                label: label as usize,
            })
        })
        .collect()
}

fn cifar_split(records: Vec<CifarRecord>) -> Result<Vec<LabeledImage>> {
    records
        .into_iter()
        .map(|r| {
            Ok(LabeledImage {
                pixels: preprocess_rgb(&r.rgb)?,
                label: r.label as usize,
            })
        })
        .collect()
}

/// Loads `(train, test)` from `<data_dir>/<dataset>/`.
///
/// MNIST-family directories hold `train-*` / `t10k-*` IDX files (not gzipped);
/// `cifar10/` holds `data_batch_1.bin`…`data_batch_5.bin` and `test_batch.bin`.
pub fn load_dataset(kind: DatasetKind, data_dir: &Path) -> Result<(Vec<LabeledImage>, Vec<LabeledImage>)> {
    let dir = data_dir.join(kind.dir_name());
    match kind {
        DatasetKind::Mnist | DatasetKind::FashionMnist => {
            Ok((load_idx_split(&dir, "train")?, load_idx_split(&dir, "t10k")?))
        }
        DatasetKind::Cifar10 => {
            let train: Vec<PathBuf> = (1..=5)
                .map(|i| require(dir.join(format!("data_batch_{i}.bin"))))
                .collect::<Result<_>>()?;
            let test = require(dir.join("test_batch.bin"))?;
            Ok((cifar_split(load_cifar10(&train)?)?, cifar_split(load_cifar10(&[test])?)?))
        }
    }
}

/// Seeded selection of `samples_per_class` images for each of the ten classes.
pub fn partition_by_class(
    dataset: &[LabeledImage],
    samples_per_class: usize,
    rng: &mut impl Rng,
) -> Result<BTreeMap<usize, Partition>> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for (i, s) in dataset.iter().enumerate() {
        if s.label >= NUM_CLASSES {
            return Err(Error::Data(format!("sample {i} has label {} outside 0..10", s.label)));
        }
        by_class[s.label].push(i);
    }
    let mut out = BTreeMap::new();
    for (class, mut indices) in by_class.into_iter().enumerate() {
        if indices.len() < samples_per_class {
            return Err(Error::Data(format!(
                "class {class} has {} samples, {samples_per_class} requested",
                indices.len()
            )));
        }
        indices.shuffle(rng);
        indices.truncate(samples_per_class);
        out.insert(
            class,
            Partition {
                owner_class: class,
                samples: indices.iter().map(|&i| dataset[i].clone()).collect(),
                source_indices: indices,
            },
        );
    }
    Ok(out)
}

/// Pixelwise mean image of a set of samples.
pub fn mean_image(samples: &[LabeledImage]) -> Option<Tensor> {
    let first = samples.first()?;
    let mut acc = vec![0f64; first.pixels.len()];
    for s in samples {
        for (a, &v) in acc.iter_mut().zip(s.pixels.data()) {
            *a += v as f64;
        }
    }
    let n = samples.len() as f64;
    Tensor::new(first.pixels.shape(), acc.into_iter().map(|v| (v / n) as f32).collect()).ok()
}
