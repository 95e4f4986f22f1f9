//! Core raster types: 8-bit grayscale images, boolean masks, label maps,
//! real-valued fields, and intensity histograms.

use crate::error::{Error, Result};

/// 2-D grid of intensities in `[0, l_max]`, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub l_max: u8,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, fill: u8) -> Self {
        GrayImage {
            width,
            height,
            l_max: 255,
            data: vec![fill; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), width * height);
        GrayImage {
            width,
            height,
            l_max: 255,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }
}

/// Row-major boolean mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn filled(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            data: vec![true; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&b| b)
    }

    /// Complement, used to turn a clump mask into an exclusion zone.
    pub fn invert(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| !b).collect(),
        }
    }

    pub fn same_dims(&self, other: &Mask) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// True when every foreground pixel of `self` is foreground in `other`.
    pub fn subset_of(&self, other: &Mask) -> bool {
        self.data
            .iter()
            .zip(&other.data)
            .all(|(&a, &b)| !a || b)
    }

    pub fn union_with(&mut self, other: &Mask) {
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a |= b;
        }
    }

    pub fn intersect_with(&mut self, other: &Mask) {
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a &= b;
        }
    }
}

/// Connected-component labeling: 0 = background, labels contiguous from 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub width: usize,
    pub height: usize,
    pub n_labels: u32,
    pub data: Vec<u32>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize) -> Self {
        LabelMap {
            width,
            height,
            n_labels: 0,
            data: vec![0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.data[y * self.width + x]
    }

    /// Mask of pixels carrying the given label.
    pub fn mask_of(&self, label: u32) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v == label).collect(),
        }
    }

    pub fn area_of(&self, label: u32) -> usize {
        self.data.iter().filter(|&&v| v == label).count()
    }
}

/// Row-major real-valued field (smoothed images, gradients, level sets).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn new(width: usize, height: usize, fill: f64) -> Self {
        ScalarField {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    pub fn from_image(img: &GrayImage) -> Self {
        ScalarField {
            width: img.width,
            height: img.height,
            data: img.data.iter().map(|&v| v as f64).collect(),
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }
}

/// Per-intensity pixel counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub counts: Vec<u64>,
    pub total: u64,
}

/// Normalized intensity distribution; bins sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbDist {
    pub probs: Vec<f64>,
}

/// Counts pixel intensities, optionally restricted to a region of interest.
pub fn compute_histogram(image: &GrayImage, roi: Option<&Mask>) -> Result<Histogram> {
    let levels = image.l_max as usize + 1;
    let mut counts = vec![0u64; levels];
    let mut total = 0u64;
    match roi {
        Some(m) => {
            if m.width != image.width || m.height != image.height {
                return Err(Error::DimensionMismatch(
                    image.width,
                    image.height,
                    m.width,
                    m.height,
                ));
            }
            for (v, &keep) in image.data.iter().zip(&m.data) {
                if keep {
                    counts[*v as usize] += 1;
                    total += 1;
                }
            }
            if total == 0 {
                return Err(Error::EmptyRoi);
            }
        }
        None => {
            for v in &image.data {
                counts[*v as usize] += 1;
            }
            total = image.data.len() as u64;
            if total == 0 {
                return Err(Error::ZeroTotal);
            }
        }
    }
    Ok(Histogram { counts, total })
}

pub fn normalize(hist: &Histogram) -> Result<ProbDist> {
    if hist.total == 0 {
        return Err(Error::ZeroTotal);
    }
    let t = hist.total as f64;
    Ok(ProbDist {
        probs: hist.counts.iter().map(|&c| c as f64 / t).collect(),
    })
}
