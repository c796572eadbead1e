//! MNIST / notMNIST ingestion and the seeded experiment splits.

mod idx;
mod letters;
mod split;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use idx::{encode_idx, parse_idx, IMAGE_MAGIC, LABEL_MAGIC};
pub use letters::{load_letters, read_image, LetterSet};
pub use split::{build_split, ClassPartition, Corpus, DatasetSplit, ImageRef, SplitManifest, SplitSizes};

pub const SIDE: usize = 28;
pub const PIXELS: usize = SIDE * SIDE;

/// A digit `0..=9` or a letter `A..=J`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassLabel {
    Digit(u8),
    Letter(char),
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassLabel::Digit(d) => write!(f, "{d}"),
            ClassLabel::Letter(c) => write!(f, "{c}"),
        }
    }
}

impl FromStr for ClassLabel {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c @ '0'..='9'), None) => Ok(ClassLabel::Digit(c as u8 - b'0')),
            (Some(c @ 'A'..='J'), None) => Ok(ClassLabel::Letter(c)),
            _ => Err(DatasetError::InvalidLabel(s.to_string())),
        }
    }
}

impl Serialize for ClassLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClassLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    MnistTrain,
    MnistTest,
    Notmnist,
}

/// A 28x28 grayscale image with pixels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub pixels: Vec<f32>,
    pub label: ClassLabel,
    pub source: Source,
}

impl LabeledImage {
    pub fn new(pixels: Vec<f32>, label: ClassLabel, source: Source) -> Result<Self, DatasetError> {
        if pixels.len() != PIXELS {
            return Err(DatasetError::BadDimensions {
                rows: pixels.len(),
                cols: 1,
            });
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(DatasetError::PixelRange);
        }
        Ok(Self { pixels, label, source })
    }

    /// Raw 0-255 bytes to `[0, 1]`.
    pub fn from_bytes(bytes: &[u8], label: ClassLabel, source: Source) -> Result<Self, DatasetError> {
        Self::new(normalize(bytes), label, source)
    }

    /// Pixels quantized back to bytes (exact for images that came from bytes).
    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels.iter().map(|p| (p * 255.0).round() as u8).collect()
    }
}

pub fn normalize(bytes: &[u8]) -> Vec<f32> {
    bytes.iter().map(|&b| f32::from(b) / 255.0).collect()
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("bad image magic {0} (expected 2051)")]
    BadImageMagic(u32),
    #[error("bad label magic {0} (expected 2049)")]
    BadLabelMagic(u32),
    #[error("image dimensions {rows}x{cols}, expected 28x28")]
    BadDimensions { rows: usize, cols: usize },
    #[error("count mismatch: {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("truncated {what}: expected {expected} bytes, found {found}")]
    Truncated {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid label {0}")]
    InvalidLabel(String),
    #[error("pixel values outside [0, 1]")]
    PixelRange,
    #[error("missing directory {0}")]
    MissingDirectory(PathBuf),
    #[error("{0}: not a readable 28x28 image")]
    Unreadable(PathBuf),
    #[error("no usable images for class {0}")]
    EmptyClass(char),
    #[error("insufficient images for {set}: need {needed} from classes {classes}, have {available}")]
    Insufficient {
        set: &'static str,
        classes: String,
        needed: usize,
        available: usize,
    },
    #[error("invalid class partition: {0}")]
    Partition(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
