//! Dataset ingestion: IDX (MNIST family) and CIFAR-10 binary batches.
//!
//! IDX layout (all integers big-endian u32):
//!
//! ```text
//! images: 00 00 08 03 | count | rows | cols | count*rows*cols unsigned bytes
//! labels: 00 00 08 01 | count | count unsigned bytes
//! ```
//!
//! CIFAR-10 records are 3073 bytes: one label byte, then the 1024-byte red,
//! green and blue planes of a 32x32 image.

use std::fs;
use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::imaging::Image;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const CIFAR_RECORD_LEN: usize = 1 + 32 * 32 * 3;
pub const DEFAULT_NUM_CLASSES: usize = 10;

pub const CIFAR10_CLASSES: [&str; 10] = [
    "airplane",
    "automobile",
    "bird",
    "cat",
    "deer",
    "dog",
    "frog",
    "horse",
    "ship",
    "truck",
];

/// Images with class labels. All images share one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    images: Vec<Image>,
    labels: Vec<usize>,
    num_classes: usize,
    shape: (usize, usize, usize),
    class_names: Option<Vec<String>>,
}

impl LabeledDataset {
    pub fn new(
        images: Vec<Image>,
        labels: Vec<usize>,
        num_classes: usize,
        shape: (usize, usize, usize),
    ) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::CountMismatch {
                images: images.len(),
                labels: labels.len(),
            });
        }
        if num_classes == 0 {
            return Err(Error::Precondition("num_classes must be positive".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::Precondition(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        if let Some(img) = images
            .iter()
            .find(|img| (img.width(), img.height(), img.channels()) != shape)
        {
            return Err(Error::Dimension(format!(
                "image of {}x{}x{} in dataset of {}x{}x{}",
                img.width(),
                img.height(),
                img.channels(),
                shape.0,
                shape.1,
                shape.2
            )));
        }
        Ok(LabeledDataset {
            images,
            labels,
            num_classes,
            shape,
            class_names: None,
        })
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_classes {
            return Err(Error::Precondition(format!(
                "{} class names for {} classes",
                names.len(),
                self.num_classes
            )));
        }
        self.class_names = Some(names);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[Image] {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    /// `(width, height, channels)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Image, usize)> {
        self.images.iter().zip(self.labels.iter().copied())
    }

    /// Order-preserving selection.
    pub fn subset(&self, indices: &[usize]) -> Result<LabeledDataset> {
        let len = self.len();
        if let Some(&index) = indices.iter().find(|&&i| i >= len) {
            return Err(Error::IndexOutOfRange { index, len });
        }
        Ok(LabeledDataset {
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            shape: self.shape,
            class_names: self.class_names.clone(),
        })
    }

    /// The first `n` cases (or all of them).
    pub fn head(&self, n: usize) -> LabeledDataset {
        let indices: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&indices).expect("indices in range")
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn truncated(path: &Path, detail: impl Into<String>) -> Error {
    Error::Truncated {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

fn read_header(
    cur: &mut Cursor<&[u8]>,
    path: &Path,
    expected: u32,
    dims: usize,
) -> Result<Vec<usize>> {
    let magic = cur
        .read_u32::<BigEndian>()
        .map_err(|_| truncated(path, "missing magic number"))?;
    if magic != expected {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found: magic,
            expected,
        });
    }
    (0..dims)
        .map(|_| {
            cur.read_u32::<BigEndian>()
                .map(|v| v as usize)
                .map_err(|_| truncated(path, "header ends early"))
        })
        .collect()
}

/// Parses IDX3 image bytes. `path` is only used for error context.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<(Vec<Image>, (usize, usize))> {
    let mut cur = Cursor::new(bytes);
    let header = read_header(&mut cur, path, IDX_IMAGES_MAGIC, 3)?;
    let (count, rows, cols) = (header[0], header[1], header[2]);
    if rows == 0 || cols == 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: format!("zero image dimension {rows}x{cols}"),
        });
    }
    let size = rows * cols;
    let body = &bytes[cur.position() as usize..];
    let needed = count * size;
    if body.len() < needed {
        return Err(truncated(
            path,
            format!(
                "{count} images of {rows}x{cols} need {needed} bytes, found {}",
                body.len()
            ),
        ));
    }
    if body.len() > needed {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: format!(
                "{} trailing bytes after {count} images",
                body.len() - needed
            ),
        });
    }
    let images = body
        .chunks_exact(size)
        .map(|chunk| Image::from_bytes(cols, rows, 1, chunk))
        .collect::<Result<Vec<_>>>()?;
    Ok((images, (cols, rows)))
}

/// Parses IDX1 label bytes.
pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<usize>> {
    let mut cur = Cursor::new(bytes);
    let count = read_header(&mut cur, path, IDX_LABELS_MAGIC, 1)?[0];
    let mut labels = Vec::with_capacity(count);
    cur.by_ref()
        .take(count as u64)
        .read_to_end(&mut labels)
        .map_err(|e| Error::io(path, e))?;
    if labels.len() < count {
        return Err(truncated(
            path,
            format!("header announces {count} labels, found {}", labels.len()),
        ));
    }
    if (cur.position() as usize) < bytes.len() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: "trailing bytes after labels".into(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= DEFAULT_NUM_CLASSES) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: format!("label {bad} outside 0..{DEFAULT_NUM_CLASSES}"),
        });
    }
    Ok(labels.into_iter().map(usize::from).collect())
}

pub fn load_idx(
    image_path: impl AsRef<Path>,
    label_path: impl AsRef<Path>,
) -> Result<LabeledDataset> {
    let (image_path, label_path) = (image_path.as_ref(), label_path.as_ref());
    let (images, (w, h)) = parse_idx_images(&read_file(image_path)?, image_path)?;
    let labels = parse_idx_labels(&read_file(label_path)?, label_path)?;
    LabeledDataset::new(images, labels, DEFAULT_NUM_CLASSES, (w, h, 1))
}

/// Serializes a grayscale dataset back to IDX bytes. Intensities are rounded.
pub fn encode_idx(ds: &LabeledDataset) -> Result<(Vec<u8>, Vec<u8>)> {
    let (w, h, c) = ds.shape();
    if c != 1 {
        return Err(Error::Precondition(
            "IDX holds single-channel images only".into(),
        ));
    }
    let mut images = Vec::with_capacity(16 + ds.len() * w * h);
    images.write_u32::<BigEndian>(IDX_IMAGES_MAGIC).unwrap();
    for v in [ds.len(), h, w] {
        images.write_u32::<BigEndian>(v as u32).unwrap();
    }
    for img in ds.images() {
        images.extend(img.pixels().iter().map(|&p| p.round() as u8));
    }
    let mut labels = Vec::with_capacity(8 + ds.len());
    labels.write_u32::<BigEndian>(IDX_LABELS_MAGIC).unwrap();
    labels.write_u32::<BigEndian>(ds.len() as u32).unwrap();
    labels.extend(ds.labels().iter().map(|&l| l as u8));
    Ok((images, labels))
}

pub fn write_idx(
    ds: &LabeledDataset,
    image_path: impl AsRef<Path>,
    label_path: impl AsRef<Path>,
) -> Result<()> {
    let (images, labels) = encode_idx(ds)?;
    fs::write(image_path.as_ref(), images).map_err(|e| Error::io(image_path.as_ref(), e))?;
    fs::write(label_path.as_ref(), labels).map_err(|e| Error::io(label_path.as_ref(), e))
}

pub fn parse_cifar10(bytes: &[u8], path: &Path) -> Result<(Vec<Image>, Vec<usize>)> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD_LEN) {
        return Err(truncated(
            path,
            format!(
                "{} bytes is not a multiple of the {CIFAR_RECORD_LEN}-byte record",
                bytes.len()
            ),
        ));
    }
    let mut images = Vec::with_capacity(bytes.len() / CIFAR_RECORD_LEN);
    let mut labels = Vec::with_capacity(images.capacity());
    for (i, record) in bytes.chunks_exact(CIFAR_RECORD_LEN).enumerate() {
        let label = record[0];
        if label as usize >= DEFAULT_NUM_CLASSES {
            return Err(Error::Format {
                path: path.to_path_buf(),
                detail: format!("record {i} has label byte {label}"),
            });
        }
        labels.push(label as usize);
        images.push(Image::from_bytes(32, 32, 3, &record[1..])?);
    }
    Ok((images, labels))
}

pub fn load_cifar10_binary<P: AsRef<Path>>(paths: &[P]) -> Result<LabeledDataset> {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let (imgs, labs) = parse_cifar10(&read_file(path)?, path)?;
        images.extend(imgs);
        labels.extend(labs);
    }
    LabeledDataset::new(images, labels, DEFAULT_NUM_CLASSES, (32, 32, 3))?
        .with_class_names(CIFAR10_CLASSES.iter().map(|s| s.to_string()).collect())
}
