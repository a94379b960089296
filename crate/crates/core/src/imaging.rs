//! Images, resolution ladders and the downsampling pathways.
//!
//! Pixels are stored as `f64` intensities in `[0, 255]`, row-major within a
//! channel and channel-planar across channels (all of R, then G, then B).
//! Nothing is quantized back to bytes; 8-bit storage only matters for
//! [`byte_cost`].

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Dimension(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        let expected = width * height * channels;
        if pixels.len() != expected {
            return Err(Error::Dimension(format!(
                "pixel buffer holds {} values, {width}x{height}x{channels} needs {expected}",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|p| !(0.0..=255.0).contains(*p)) {
            return Err(Error::Precondition(format!(
                "intensity {bad} outside [0, 255]"
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            pixels,
        })
    }

    /// Builds an image from 8-bit samples in the same planar layout.
    pub fn from_bytes(width: usize, height: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        Image::new(
            width,
            height,
            channels,
            bytes.iter().map(|&b| f64::from(b)).collect(),
        )
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Image::new(
            width,
            height,
            channels,
            vec![value; width * height * channels],
        )
    }

    // Internal constructor for results of operations that cannot leave range.
    fn from_parts(width: usize, height: usize, channels: usize, pixels: Vec<f64>) -> Self {
        debug_assert_eq!(pixels.len(), width * height * channels);
        Image {
            width,
            height,
            channels,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.pixels[channel * n..(channel + 1) * n]
    }

    pub fn get(&self, channel: usize, y: usize, x: usize) -> f64 {
        self.pixels[(channel * self.height + y) * self.width + x]
    }

    pub fn channel_mean(&self, channel: usize) -> f64 {
        let plane = self.plane(channel);
        plane.iter().sum::<f64>() / plane.len() as f64
    }

    pub fn byte_cost(&self) -> u64 {
        byte_cost(self.width, self.height, self.channels)
    }

    fn check_factor(&self, factor: usize) -> Result<()> {
        check_divides(self.width, self.height, factor)
    }
}

pub(crate) fn check_divides(width: usize, height: usize, factor: usize) -> Result<()> {
    if factor == 0 {
        return Err(Error::Precondition(
            "downsampling factor must be positive".into(),
        ));
    }
    if !width.is_multiple_of(factor) {
        return Err(Error::NotDivisible {
            axis: "width",
            size: width,
            factor,
        });
    }
    if !height.is_multiple_of(factor) {
        return Err(Error::NotDivisible {
            axis: "height",
            size: height,
            factor,
        });
    }
    Ok(())
}

/// Bytes needed to store an 8-bit image of the given shape.
pub fn byte_cost(width: usize, height: usize, channels: usize) -> u64 {
    (width * height * channels) as u64
}

/// Averages each `factor x factor` block, per channel.
pub fn block_average_downsample(img: &Image, factor: usize) -> Result<Image> {
    img.check_factor(factor)?;
    if factor == 1 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width / factor, img.height / factor);
    let area = (factor * factor) as f64;
    let mut out = Vec::with_capacity(w * h * img.channels);
    for c in 0..img.channels {
        let plane = img.plane(c);
        for by in 0..h {
            for bx in 0..w {
                let mut sum = 0.0;
                for dy in 0..factor {
                    let row = (by * factor + dy) * img.width + bx * factor;
                    sum += plane[row..row + factor].iter().sum::<f64>();
                }
                out.push(sum / area);
            }
        }
    }
    Ok(Image::from_parts(w, h, img.channels, out))
}

/// Nearest-neighbour enlargement: each pixel becomes a `factor x factor` block.
pub fn block_replicate_upsample(img: &Image, factor: usize) -> Result<Image> {
    if factor == 0 {
        return Err(Error::Precondition(
            "upsampling factor must be positive".into(),
        ));
    }
    if factor == 1 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width * factor, img.height * factor);
    let mut out = Vec::with_capacity(w * h * img.channels);
    for c in 0..img.channels {
        let plane = img.plane(c);
        for y in 0..h {
            let src = &plane[(y / factor) * img.width..(y / factor + 1) * img.width];
            for x in 0..w {
                out.push(src[x / factor]);
            }
        }
    }
    Ok(Image::from_parts(w, h, img.channels, out))
}

struct AxisSample {
    lo: usize,
    hi: usize,
    frac: f64,
}

fn axis_samples(dst: usize, src: usize) -> Vec<AxisSample> {
    let scale = src as f64 / dst as f64;
    let max = (src - 1) as f64;
    (0..dst)
        .map(|j| {
            let x = ((j as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let lo = x.floor() as usize;
            AxisSample {
                lo,
                hi: (lo + 1).min(src - 1),
                frac: x - lo as f64,
            }
        })
        .collect()
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    (a + (b - a) * t).clamp(a.min(b), a.max(b))
}

/// Bilinear resampling at half-pixel centres, without corner alignment and
/// with border clamping.
pub fn bilinear_resize(img: &Image, new_width: usize, new_height: usize) -> Result<Image> {
    if new_width == 0 || new_height == 0 {
        return Err(Error::Dimension(format!(
            "target dimensions must be positive, got {new_width}x{new_height}"
        )));
    }
    if new_width == img.width && new_height == img.height {
        return Ok(img.clone());
    }
    let xs = axis_samples(new_width, img.width);
    let ys = axis_samples(new_height, img.height);
    let mut out = Vec::with_capacity(new_width * new_height * img.channels);
    for c in 0..img.channels {
        let plane = img.plane(c);
        for sy in &ys {
            let top = &plane[sy.lo * img.width..(sy.lo + 1) * img.width];
            let bottom = &plane[sy.hi * img.width..(sy.hi + 1) * img.width];
            for sx in &xs {
                let upper = lerp(top[sx.lo], top[sx.hi], sx.frac);
                let lower = lerp(bottom[sx.lo], bottom[sx.hi], sx.frac);
                out.push(lerp(upper, lower, sy.frac));
            }
        }
    }
    Ok(Image::from_parts(new_width, new_height, img.channels, out))
}

/// Bilinear resize down by `factor`, then back up to the original size.
pub fn downsample_roundtrip(img: &Image, factor: usize) -> Result<Image> {
    img.check_factor(factor)?;
    if factor == 1 {
        return Ok(img.clone());
    }
    let small = bilinear_resize(img, img.width / factor, img.height / factor)?;
    bilinear_resize(&small, img.width, img.height)
}

/// BT.601 luminance.
pub fn rgb_to_grayscale(img: &Image) -> Result<Image> {
    if img.channels != 3 {
        return Err(Error::Precondition(format!(
            "grayscale conversion needs 3 channels, image has {}",
            img.channels
        )));
    }
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let gray = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((r, g), b)| (0.299 * r + 0.587 * g + 0.114 * b).clamp(0.0, 255.0))
        .collect();
    Ok(Image::from_parts(img.width, img.height, 1, gray))
}

/// How a coarse representation is produced and handed to a classifier that
/// expects full-size input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pathway {
    /// Block averaging, restored to full size by block replication.
    #[default]
    BlockAverage,
    /// Block averaging, restored to full size by bilinear interpolation.
    BlockAverageBilinear,
    /// Bilinear resize down, bilinear resize back up.
    BilinearRoundtrip,
}

impl Pathway {
    pub const ALL: [Pathway; 3] = [
        Pathway::BlockAverage,
        Pathway::BlockAverageBilinear,
        Pathway::BilinearRoundtrip,
    ];

    /// Produces the full-size image a classifier sees for a given factor.
    pub fn apply(self, img: &Image, factor: usize) -> Result<Image> {
        match self {
            Pathway::BlockAverage => {
                let small = block_average_downsample(img, factor)?;
                block_replicate_upsample(&small, factor)
            }
            Pathway::BlockAverageBilinear => {
                let small = block_average_downsample(img, factor)?;
                bilinear_resize(&small, img.width, img.height)
            }
            Pathway::BilinearRoundtrip => downsample_roundtrip(img, factor),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Pathway::BlockAverage => "block-average",
            Pathway::BlockAverageBilinear => "block-average-bilinear",
            Pathway::BilinearRoundtrip => "bilinear-roundtrip",
        }
    }
}

impl fmt::Display for Pathway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pathway {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pathway::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown pathway `{s}`")))
    }
}

/// Downsampling factors a cascade climbs, coarsest first, ending at 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolutionLadder {
    factors: Vec<usize>,
}

impl ResolutionLadder {
    pub fn new(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Config("resolution ladder is empty".into()));
        }
        if factors.contains(&0) {
            return Err(Error::Config("ladder factors must be positive".into()));
        }
        if factors.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::Config(format!(
                "ladder factors must be strictly decreasing, got {factors:?}"
            )));
        }
        if factors.last() != Some(&1) {
            return Err(Error::Config(format!(
                "ladder must end at full resolution (factor 1), got {factors:?}"
            )));
        }
        Ok(ResolutionLadder { factors })
    }

    /// The deployed configuration: quarter, half, then full resolution.
    pub fn standard() -> Self {
        ResolutionLadder {
            factors: vec![4, 2, 1],
        }
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn validate_for(&self, width: usize, height: usize) -> Result<()> {
        self.factors
            .iter()
            .try_for_each(|&f| check_divides(width, height, f))
    }

    /// Cumulative bytes paid when stopping at each stage.
    pub fn cumulative_costs(&self, width: usize, height: usize, channels: usize) -> Vec<u64> {
        self.factors
            .iter()
            .scan(0u64, |acc, &f| {
                *acc += byte_cost(width / f, height / f, channels);
                Some(*acc)
            })
            .collect()
    }
}

impl Default for ResolutionLadder {
    fn default() -> Self {
        ResolutionLadder::standard()
    }
}
