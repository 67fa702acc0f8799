//! Images, labelled samples and the big-endian IDX container.

use std::path::Path;

use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Grayscale image with pixels in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != height * width || pixels.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels for a {height}x{width} image",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument("pixel outside [0, 1]".into()));
        }
        Ok(Self { height, width, pixels })
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Center crop to `size` x `size` when larger, then average-pool by the
    /// largest integer factor that reaches `size`.
    pub fn resize_to(&self, size: usize) -> Result<Image> {
        if size == 0 || size > self.height.min(self.width) {
            return Err(Error::InvalidArgument(format!(
                "cannot resize {}x{} to {size}x{size}",
                self.height, self.width
            )));
        }
        let factor = self.height.min(self.width) / size;
        let span = factor * size;
        let top = (self.height - span) / 2;
        let left = (self.width - span) / 2;
        let mut pixels = Vec::with_capacity(size * size);
        for r in 0..size {
            for c in 0..size {
                let mut acc = 0.0;
                for dr in 0..factor {
                    for dc in 0..factor {
                        acc += self.pixels[(top + r * factor + dr) * self.width + left + c * factor + dc];
                    }
                }
                pixels.push(acc / (factor * factor) as f64);
            }
        }
        Image::new(size, size, pixels)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Image,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdxDataset {
    pub rows: usize,
    pub cols: usize,
    pub samples: Vec<Sample>,
}

impl IdxDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.samples.iter().map(|s| s.label + 1).max().unwrap_or(0)
    }

    pub fn resized(&self, size: usize) -> Result<IdxDataset> {
        if size == self.rows && size == self.cols {
            return Ok(self.clone());
        }
        let samples = self
            .samples
            .iter()
            .map(|s| Ok(Sample { image: s.image.resize_to(size)?, label: s.label }))
            .collect::<Result<Vec<_>>>()?;
        Ok(IdxDataset { rows: size, cols: size, samples })
    }

    /// Keeps samples whose label is in `classes`, relabelled to their
    /// position in that list.
    pub fn with_classes(&self, classes: &[usize]) -> IdxDataset {
        let samples = self
            .samples
            .iter()
            .filter_map(|s| {
                classes.iter().position(|&c| c == s.label).map(|label| Sample { image: s.image.clone(), label })
            })
            .collect();
        IdxDataset { rows: self.rows, cols: self.cols, samples }
    }

    pub fn take(&self, count: usize) -> IdxDataset {
        IdxDataset { rows: self.rows, cols: self.cols, samples: self.samples.iter().take(count).cloned().collect() }
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Parse { offset, message: "truncated header".into() })
}

/// Parses an IDX3 image file into `(rows, cols, images)`.
pub fn parse_idx_images(bytes: &[u8], limit: Option<usize>) -> Result<(usize, usize, Vec<Image>)> {
    let magic = read_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Parse { offset: 0, message: format!("bad image magic {magic:#010x}") });
    }
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Parse { offset: 8, message: "zero image dimension".into() });
    }
    let take = limit.map_or(count, |l| l.min(count));
    let stride = rows * cols;
    let mut images = Vec::with_capacity(take);
    for i in 0..take {
        let start = 16 + i * stride;
        let raw = bytes.get(start..start + stride).ok_or_else(|| Error::Parse {
            offset: bytes.len(),
            message: format!("truncated at image {i} of {count}"),
        })?;
        images.push(Image { height: rows, width: cols, pixels: raw.iter().map(|&b| b as f64 / 255.0).collect() });
    }
    Ok((rows, cols, images))
}

pub fn parse_idx_labels(bytes: &[u8], limit: Option<usize>) -> Result<Vec<usize>> {
    let magic = read_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Parse { offset: 0, message: format!("bad label magic {magic:#010x}") });
    }
    let count = read_u32(bytes, 4)? as usize;
    let take = limit.map_or(count, |l| l.min(count));
    let raw = bytes.get(8..8 + take).ok_or_else(|| Error::Parse {
        offset: bytes.len(),
        message: format!("truncated label data, expected {take} labels"),
    })?;
    Ok(raw.iter().map(|&b| b as usize).collect())
}

pub fn load_idx(images_path: &Path, labels_path: &Path, limit: Option<usize>) -> Result<IdxDataset> {
    let image_bytes = std::fs::read(images_path)?;
    let label_bytes = std::fs::read(labels_path)?;
    let image_count = read_u32(&image_bytes, 4)? as usize;
    let label_count = read_u32(&label_bytes, 4)? as usize;
    if image_count != label_count {
        return Err(Error::Parse {
            offset: 4,
            message: format!("{image_count} images but {label_count} labels"),
        });
    }
    let (rows, cols, images) = parse_idx_images(&image_bytes, limit)?;
    let labels = parse_idx_labels(&label_bytes, limit)?;
    let samples = images.into_iter().zip(labels).map(|(image, label)| Sample { image, label }).collect();
    Ok(IdxDataset { rows, cols, samples })
}

/// Serializes images (pixels rounded to u8) and labels as IDX files.
pub fn write_idx(dataset: &IdxDataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let mut img = Vec::with_capacity(16 + dataset.len() * dataset.rows * dataset.cols);
    img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&(dataset.len() as u32).to_be_bytes());
    img.extend_from_slice(&(dataset.rows as u32).to_be_bytes());
    img.extend_from_slice(&(dataset.cols as u32).to_be_bytes());
    for s in &dataset.samples {
        img.extend(s.image.pixels.iter().map(|p| (p * 255.0).round().clamp(0.0, 255.0) as u8));
    }
    let mut lab = Vec::with_capacity(8 + dataset.len());
    lab.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(dataset.len() as u32).to_be_bytes());
    lab.extend(dataset.samples.iter().map(|s| s.label as u8));
    std::fs::write(images_path, img)?;
    std::fs::write(labels_path, lab)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(count: u32, rows: u32, cols: u32) -> (Vec<u8>, Vec<u8>) {
        let mut img = Vec::new();
        img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        img.extend_from_slice(&count.to_be_bytes());
        img.extend_from_slice(&rows.to_be_bytes());
        img.extend_from_slice(&cols.to_be_bytes());
        for i in 0..count * rows * cols {
            img.push((i % 256) as u8);
        }
        let mut lab = Vec::new();
        lab.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        lab.extend_from_slice(&count.to_be_bytes());
        lab.extend((0..count).map(|i| (i % 10) as u8));
        (img, lab)
    }

    #[test]
    fn parses_fixture() {
        let (img, lab) = fixture(10, 4, 3);
        let (rows, cols, images) = parse_idx_images(&img, None).unwrap();
        assert_eq!((rows, cols, images.len()), (4, 3, 10));
        assert_eq!(images[1].pixels[0], 12.0 / 255.0);
        assert_eq!(parse_idx_labels(&lab, None).unwrap(), (0..10).collect::<Vec<_>>());
        assert_eq!(parse_idx_images(&img, Some(1)).unwrap().2.len(), 1);
    }

    #[test]
    fn bad_magic_names_offset() {
        let (mut img, _) = fixture(2, 2, 2);
        img[3] = 0x01;
        let err = parse_idx_images(&img, None).unwrap_err();
        assert!(matches!(err, Error::Parse { offset: 0, .. }));
        assert!(err.to_string().contains("offset 0"));
    }

    #[test]
    fn truncation_detected() {
        let (img, lab) = fixture(3, 2, 2);
        assert!(matches!(parse_idx_images(&img[..img.len() - 1], None), Err(Error::Parse { .. })));
        assert!(matches!(parse_idx_labels(&lab[..9], None), Err(Error::Parse { .. })));
        assert!(matches!(parse_idx_images(&img[..10], None), Err(Error::Parse { .. })));
    }

    #[test]
    fn resize_by_crop_and_pool() {
        let img = Image::new(4, 4, (0..16).map(|i| i as f64 / 15.0).collect()).unwrap();
        let small = img.resize_to(2).unwrap();
        let want = [(0.0 + 1.0 + 4.0 + 5.0) / 4.0 / 15.0, (2.0 + 3.0 + 6.0 + 7.0) / 4.0 / 15.0];
        assert!((small.pixels[0] - want[0]).abs() < 1e-15);
        assert!((small.pixels[1] - want[1]).abs() < 1e-15);
        let cropped = Image::new(5, 5, vec![0.5; 25]).unwrap().resize_to(2).unwrap();
        assert_eq!(cropped.pixels, vec![0.5; 4]);
        assert!(img.resize_to(5).is_err());
    }

    #[test]
    fn class_filter_relabels() {
        let images = (0..6).map(|_| Image::new(1, 1, vec![0.0]).unwrap());
        let ds = IdxDataset {
            rows: 1,
            cols: 1,
            samples: images.zip([3, 7, 1, 3, 9, 7]).map(|(image, label)| Sample { image, label }).collect(),
        };
        let sub = ds.with_classes(&[7, 3]);
        assert_eq!(sub.samples.iter().map(|s| s.label).collect::<Vec<_>>(), vec![1, 0, 1, 0]);
    }
}
