//! notMNIST-style letter folders: `<root>/<A..J>/*.png`.

use std::fs;
use std::path::{Path, PathBuf};

use super::{ClassLabel, DatasetError, LabeledImage, Source, SIDE};

#[derive(Debug, Clone, Default)]
pub struct LetterSet {
    pub images: Vec<LabeledImage>,
    /// Files that could not be decoded or were not 28x28.
    pub skipped: Vec<PathBuf>,
}

/// Loads letter images for `classes` from one subdirectory per letter.
///
/// Unreadable, corrupt or wrongly sized files are skipped and reported. A
/// missing root is an error, as is a requested class with no usable images.
/// Files are read in name order so results are reproducible.
pub fn load_letters(root: &Path, classes: &[char]) -> Result<LetterSet, DatasetError> {
    if !root.is_dir() {
        return Err(DatasetError::MissingDirectory(root.to_path_buf()));
    }
    let mut set = LetterSet::default();
    for &class in classes {
        let label: ClassLabel = class.to_string().parse()?;
        let dir = root.join(class.to_string());
        let mut files: Vec<PathBuf> = match fs::read_dir(&dir) {
            Ok(entries) => entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file())
                .collect(),
            Err(_) => Vec::new(),
        };
        files.sort();
        let before = set.images.len();
        for path in files {
            match decode(&path) {
                Some(bytes) => set
                    .images
                    .push(LabeledImage::from_bytes(&bytes, label, Source::Notmnist)?),
                None => {
                    tracing::debug!(path = %path.display(), "skipping unreadable letter image");
                    set.skipped.push(path);
                }
            }
        }
        if set.images.len() == before {
            return Err(DatasetError::EmptyClass(class));
        }
    }
    Ok(set)
}

/// Reads one 28x28 grayscale image file as raw bytes.
pub fn read_image(path: &Path) -> Result<Vec<u8>, DatasetError> {
    decode(path).ok_or_else(|| DatasetError::Unreadable(path.to_path_buf()))
}

fn decode(path: &Path) -> Option<Vec<u8>> {
    let img = image::open(path).ok()?.to_luma8();
    (img.width() as usize == SIDE && img.height() as usize == SIDE).then(|| img.into_raw())
}
