//! Histogram thresholding: standard Otsu by within-class variance
//! minimization, and a variant that reweights the distribution by a prior
//! probability of the dark class before thresholding. Dark pixels are the
//! object class throughout.

use crate::error::{Error, Result};
use crate::raster::{GrayImage, Mask, ProbDist};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    pub t: u8,
    pub objective: f64,
}

/// Prior probability of the dark (object) class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NucleusPrior {
    pub alpha: f64,
}

impl NucleusPrior {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParam(format!(
                "prior must lie strictly inside (0, 1), got {alpha}"
            )));
        }
        Ok(NucleusPrior { alpha })
    }
}

/// ω₁σ₁² + ω₂σ₂² for the split {0..=t} / {t+1..}, each class renormalized.
pub fn within_class_variance(p: &ProbDist, t: u8) -> Result<f64> {
    let levels = p.probs.len();
    let t = t as usize;
    if t + 1 >= levels {
        return Err(Error::InvalidParam(format!(
            "threshold {t} leaves no upper class"
        )));
    }
    let class_stats = |range: std::ops::Range<usize>| -> Option<(f64, f64)> {
        let w: f64 = p.probs[range.clone()].iter().sum();
        if w <= 0.0 {
            return None;
        }
        let mean: f64 = range.clone().map(|i| i as f64 * p.probs[i]).sum::<f64>() / w;
        let var: f64 = range
            .map(|i| (i as f64 - mean).powi(2) * p.probs[i])
            .sum::<f64>()
            / w;
        Some((w, var))
    };
    let (w1, v1) = class_stats(0..t + 1).ok_or(Error::DegenerateDistribution)?;
    let (w2, v2) = class_stats(t + 1..levels).ok_or(Error::DegenerateDistribution)?;
    Ok(w1 * v1 + w2 * v2)
}

/// Threshold minimizing the within-class variance over every split that
/// leaves both classes nonempty; ties go to the smallest threshold.
pub fn otsu(p: &ProbDist) -> Result<ThresholdResult> {
    let levels = p.probs.len();
    let mut best: Option<ThresholdResult> = None;
    for t in 0..levels - 1 {
        let Ok(obj) = within_class_variance(p, t as u8) else {
            continue;
        };
        match best {
            Some(b) if b.objective <= obj => {}
            _ => best = Some(ThresholdResult { t: t as u8, objective: obj }),
        }
    }
    best.ok_or(Error::DegenerateDistribution)
}

/// Reweights p so the sub-prior dark prefix carries weight 1−α and the rest
/// α, then renormalizes. The cut l is the largest intensity whose inclusive
/// prefix mass stays below α; when even p(0) ≥ α every bin would scale by the
/// same α and renormalization undoes it, so p is returned unchanged.
pub fn reweight_distribution(p: &ProbDist, prior: NucleusPrior) -> Result<ProbDist> {
    let alpha = NucleusPrior::new(prior.alpha)?.alpha;
    let mut cut: Option<usize> = None;
    let mut prefix = 0.0f64;
    for (i, &q) in p.probs.iter().enumerate() {
        prefix += q;
        if prefix < alpha {
            cut = Some(i);
        } else {
            break;
        }
    }
    let Some(l) = cut else {
        return Ok(p.clone());
    };
    let weighted: Vec<f64> = p
        .probs
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            if i <= l {
                q * (1.0 - alpha)
            } else {
                q * alpha
            }
        })
        .collect();
    let total: f64 = weighted.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateDistribution);
    }
    Ok(ProbDist {
        probs: weighted.iter().map(|&q| q / total).collect(),
    })
}

/// Otsu on the prior-reweighted distribution; the objective refers to the
/// reweighted distribution.
pub fn modified_otsu(p: &ProbDist, prior: NucleusPrior) -> Result<ThresholdResult> {
    otsu(&reweight_distribution(p, prior)?)
}

/// Foreground = pixels with intensity ≤ t, optionally restricted to a roi.
pub fn apply_threshold(image: &GrayImage, t: u8, roi: Option<&Mask>) -> Result<Mask> {
    if let Some(m) = roi {
        if m.width != image.width || m.height != image.height {
            return Err(Error::DimensionMismatch(
                image.width,
                image.height,
                m.width,
                m.height,
            ));
        }
    }
    let data = image
        .data
        .iter()
        .enumerate()
        .map(|(i, &v)| v <= t && roi.is_none_or(|m| m.data[i]))
        .collect();
    Ok(Mask {
        width: image.width,
        height: image.height,
        data,
    })
}
