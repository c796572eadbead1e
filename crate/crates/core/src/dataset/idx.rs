//! The big-endian IDX container used by MNIST.

use super::{normalize, ClassLabel, DatasetError, LabeledImage, Source, PIXELS, SIDE};

pub const IMAGE_MAGIC: u32 = 2051;
pub const LABEL_MAGIC: u32 = 2049;

fn be_u32(bytes: &[u8], at: usize, what: &'static str) -> Result<u32, DatasetError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or(DatasetError::Truncated {
            what,
            expected: at + 4,
            found: bytes.len(),
        })
}

/// Parses an IDX image file and its label file into labelled images, in file
/// order, with pixels scaled to `[0, 1]`.
pub fn parse_idx(image_bytes: &[u8], label_bytes: &[u8], source: Source) -> Result<Vec<LabeledImage>, DatasetError> {
    let magic = be_u32(image_bytes, 0, "image header")?;
    if magic != IMAGE_MAGIC {
        return Err(DatasetError::BadImageMagic(magic));
    }
    let magic = be_u32(label_bytes, 0, "label header")?;
    if magic != LABEL_MAGIC {
        return Err(DatasetError::BadLabelMagic(magic));
    }
    let images = be_u32(image_bytes, 4, "image header")? as usize;
    let rows = be_u32(image_bytes, 8, "image header")? as usize;
    let cols = be_u32(image_bytes, 12, "image header")? as usize;
    let labels = be_u32(label_bytes, 4, "label header")? as usize;
    if rows != SIDE || cols != SIDE {
        return Err(DatasetError::BadDimensions { rows, cols });
    }
    if images != labels {
        return Err(DatasetError::CountMismatch { images, labels });
    }
    let pixel_data = &image_bytes[16..];
    if pixel_data.len() < images * PIXELS {
        return Err(DatasetError::Truncated {
            what: "image data",
            expected: 16 + images * PIXELS,
            found: image_bytes.len(),
        });
    }
    let label_data = &label_bytes[8..];
    if label_data.len() < labels {
        return Err(DatasetError::Truncated {
            what: "label data",
            expected: 8 + labels,
            found: label_bytes.len(),
        });
    }
    pixel_data
        .chunks_exact(PIXELS)
        .take(images)
        .zip(label_data)
        .map(|(px, &label)| {
            if label > 9 {
                return Err(DatasetError::InvalidLabel(label.to_string()));
            }
            Ok(LabeledImage {
                pixels: normalize(px),
                label: ClassLabel::Digit(label),
                source,
            })
        })
        .collect()
}

/// Writes digit images back out as an (image file, label file) IDX pair.
pub fn encode_idx(images: &[LabeledImage]) -> (Vec<u8>, Vec<u8>) {
    let n = images.len() as u32;
    let mut img = Vec::with_capacity(16 + images.len() * PIXELS);
    for v in [IMAGE_MAGIC, n, SIDE as u32, SIDE as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    let mut lab = Vec::with_capacity(8 + images.len());
    for v in [LABEL_MAGIC, n] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    for im in images {
        img.extend(im.to_bytes());
        lab.push(match im.label {
            ClassLabel::Digit(d) => d,
            ClassLabel::Letter(_) => 255,
        });
    }
    (img, lab)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (Vec<u8>, Vec<u8>) {
        let imgs: Vec<LabeledImage> = (0..3u8)
            .map(|i| {
                let mut px = vec![0u8; PIXELS];
                px[0] = 255;
                px[1] = i;
                LabeledImage::from_bytes(&px, ClassLabel::Digit(i), Source::MnistTest).unwrap()
            })
            .collect();
        encode_idx(&imgs)
    }

    #[test]
    fn parses_in_order_and_normalizes() {
        let (img, lab) = tiny();
        let parsed = parse_idx(&img, &lab, Source::MnistTest).unwrap();
        assert_eq!(parsed.len(), 3);
        assert_eq!(parsed[2].label, ClassLabel::Digit(2));
        assert_eq!(parsed[0].pixels[0], 1.0);
        assert_eq!(parsed[1].pixels[1], 1.0 / 255.0);
    }

    #[test]
    fn header_errors_are_distinct() {
        let (img, lab) = tiny();
        let mut bad = lab.clone();
        bad[3] ^= 0xff;
        assert!(matches!(
            parse_idx(&img, &bad, Source::MnistTest),
            Err(DatasetError::BadLabelMagic(_))
        ));
        let mut bad = img.clone();
        bad[2] = 0;
        assert!(matches!(
            parse_idx(&bad, &lab, Source::MnistTest),
            Err(DatasetError::BadImageMagic(_))
        ));
        let mut bad = img.clone();
        bad[11] = 27;
        assert!(matches!(
            parse_idx(&bad, &lab, Source::MnistTest),
            Err(DatasetError::BadDimensions { rows: 27, cols: 28 })
        ));
        let mut bad = lab.clone();
        bad[7] = 2;
        assert!(matches!(
            parse_idx(&img, &bad, Source::MnistTest),
            Err(DatasetError::CountMismatch { images: 3, labels: 2 })
        ));
        assert!(matches!(
            parse_idx(&img[..img.len() - 1], &lab, Source::MnistTest),
            Err(DatasetError::Truncated { .. })
        ));
        assert!(matches!(
            parse_idx(&img[..6], &lab, Source::MnistTest),
            Err(DatasetError::Truncated { .. })
        ));
    }
}
