//! End-to-end orchestration: optional focus-stack fusion, clump extraction,
//! per-clump nucleus detection, and per-nucleus contour evolution.

use crate::error::{Error, Result};
use crate::levelset::{self, DrlseParams};
use crate::morphology;
use crate::preprocess;
use crate::raster::{compute_histogram, normalize, GrayImage, LabelMap, Mask};
use crate::thresholding::{self, NucleusPrior};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub median_kernel: usize,
    pub ahe_tiles: usize,
    pub ahe_clip: f64,
    /// Depth below which intensity basins are flattened away before the
    /// minima pass; basins deeper than this become clump foreground.
    pub hmax_h: u8,
    /// Pixel count at 1024x1024 scale; rescaled by image_area / 1024^2.
    pub min_clump_area: usize,
    pub nucleus_prior: f64,
    pub min_nucleus_area: usize,
    /// Disc radius by which each nucleus is grown to form the contour seed.
    pub init_disc_margin: usize,
    pub drlse: DrlseParams,
    pub edf_window: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            median_kernel: 5,
            ahe_tiles: 8,
            ahe_clip: 0.01,
            hmax_h: 130,
            min_clump_area: 2000,
            nucleus_prior: 0.05,
            min_nucleus_area: 100,
            init_disc_margin: 5,
            drlse: DrlseParams::default(),
            edf_window: 9,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.median_kernel == 0 || self.median_kernel.is_multiple_of(2) {
            return Err(Error::InvalidParam(
                "median_kernel must be odd and >= 1".into(),
            ));
        }
        if self.ahe_tiles == 0 {
            return Err(Error::InvalidParam("ahe_tiles must be >= 1".into()));
        }
        if !(self.ahe_clip > 0.0 && self.ahe_clip <= 1.0) {
            return Err(Error::InvalidParam("ahe_clip must lie in (0, 1]".into()));
        }
        if self.hmax_h == 0 {
            return Err(Error::InvalidParam("hmax_h must be >= 1".into()));
        }
        NucleusPrior::new(self.nucleus_prior)?;
        if self.edf_window == 0 || self.edf_window.is_multiple_of(2) {
            return Err(Error::InvalidParam(
                "edf_window must be odd and >= 1".into(),
            ));
        }
        self.drlse.validate()
    }
}

/// One contour evolution, kept for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRun {
    pub clump_label: u32,
    pub nucleus_label: u32,
    pub iters: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub config: PipelineConfig,
    pub stage_ms: Vec<(String, f64)>,
    pub cell_runs: Vec<CellRun>,
}

/// Output of the full chain. Cells are ordered by (clump label, nucleus
/// label); cells[i] belongs to nucleus label i+1 in `nuclei`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub clumps: LabelMap,
    pub nuclei: LabelMap,
    pub nucleus_centroids: Vec<(f64, f64)>,
    pub cells: Vec<Mask>,
    pub provenance: Provenance,
}

/// Focus-stack fusion: each output pixel is copied from the plane whose
/// window x window neighborhood (truncated at the borders) has the largest
/// intensity variance; ties go to the lowest plane index. Scores are the
/// exact integers n*sum(x^2) - sum(x)^2.
pub fn edf_fuse(stack: &[GrayImage], window: usize) -> Result<GrayImage> {
    if stack.is_empty() {
        return Err(Error::InvalidParam("focus stack is empty".into()));
    }
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidParam(
            "fusion window must be odd and >= 1".into(),
        ));
    }
    let (w, h) = (stack[0].width, stack[0].height);
    for img in &stack[1..] {
        if img.width != w || img.height != h {
            return Err(Error::DimensionMismatch(w, h, img.width, img.height));
        }
    }
    if stack.len() == 1 {
        return Ok(stack[0].clone());
    }

    // per-plane summed-area tables of v and v^2, (h+1) x (w+1)
    let mut sats: Vec<(Vec<i64>, Vec<i64>)> = Vec::with_capacity(stack.len());
    for img in stack {
        let mut s1 = vec![0i64; (w + 1) * (h + 1)];
        let mut s2 = vec![0i64; (w + 1) * (h + 1)];
        for y in 0..h {
            for x in 0..w {
                let v = img.data[y * w + x] as i64;
                let i = (y + 1) * (w + 1) + (x + 1);
                s1[i] = v + s1[i - 1] + s1[i - (w + 1)] - s1[i - (w + 1) - 1];
                s2[i] = v * v + s2[i - 1] + s2[i - (w + 1)] - s2[i - (w + 1) - 1];
            }
        }
        sats.push((s1, s2));
    }
    let rect = |s: &[i64], x0: usize, y0: usize, x1: usize, y1: usize| -> i64 {
        s[(y1 + 1) * (w + 1) + (x1 + 1)] - s[y0 * (w + 1) + (x1 + 1)]
            - s[(y1 + 1) * (w + 1) + x0]
            + s[y0 * (w + 1) + x0]
    };

    let r = (window / 2) as isize;
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        let y0 = (y as isize - r).max(0) as usize;
        let y1 = ((y as isize + r) as usize).min(h - 1);
        for x in 0..w {
            let x0 = (x as isize - r).max(0) as usize;
            let x1 = ((x as isize + r) as usize).min(w - 1);
            let n = ((x1 - x0 + 1) * (y1 - y0 + 1)) as i64;
            let mut best_score = -1i64;
            let mut best_plane = 0usize;
            for (pi, (s1, s2)) in sats.iter().enumerate() {
                let sum = rect(s1, x0, y0, x1, y1);
                let sum2 = rect(s2, x0, y0, x1, y1);
                let score = n * sum2 - sum * sum;
                if score > best_score {
                    best_score = score;
                    best_plane = pi;
                }
            }
            out[y * w + x] = stack[best_plane].data[y * w + x];
        }
    }
    Ok(GrayImage::from_data(w, h, out))
}

fn invert_image(image: &GrayImage) -> GrayImage {
    GrayImage::from_data(
        image.width,
        image.height,
        image.data.iter().map(|&v| image.l_max - v).collect(),
    )
}

/// Clump extraction: median filter, adaptive equalization, suppression of
/// basins shallower than hmax_h (via the complement), regional minima, hole
/// filling, 8-connected labeling, and an area filter rescaled to the image
/// size. Returns the labels plus the equalized image reused downstream.
///
/// A degenerate minima response covering more than 90% of the image (flat
/// scenes) yields zero clumps rather than one all-image clump.
pub fn segment_clumps(image: &GrayImage, cfg: &PipelineConfig) -> Result<(LabelMap, GrayImage)> {
    cfg.validate()?;
    let med = preprocess::median_filter(image, cfg.median_kernel)?;
    let pre = preprocess::adaptive_hist_eq(&med, cfg.ahe_tiles, cfg.ahe_clip)?;
    let suppressed = invert_image(&morphology::h_maxima_suppress(
        &invert_image(&pre),
        cfg.hmax_h,
    )?);
    let minima = morphology::regional_minima(&suppressed);
    let (w, h) = (image.width, image.height);
    let frac = minima.count() as f64 / (w * h) as f64;
    if frac > 0.9 {
        return Ok((LabelMap::new(w, h), pre));
    }
    let filled = morphology::fill_holes(&minima);
    let labels = morphology::connected_components(&filled, 8)?;
    let scale = (w * h) as f64 / (1024.0 * 1024.0);
    let eff_min = (cfg.min_clump_area as f64 * scale).round() as usize;
    Ok((morphology::remove_small_components(&labels, eff_min), pre))
}

/// Nucleus detection inside one clump: dark-prior reweighted threshold on
/// the clump's histogram, dark class kept, holes filled, small components
/// dropped. A single-level (degenerate) clump yields zero nuclei.
pub fn segment_nuclei(
    preprocessed: &GrayImage,
    clump: &Mask,
    cfg: &PipelineConfig,
) -> Result<(LabelMap, Vec<(f64, f64)>)> {
    cfg.validate()?;
    let (w, h) = (preprocessed.width, preprocessed.height);
    let hist = compute_histogram(preprocessed, Some(clump))?;
    let p = normalize(&hist)?;
    let prior = NucleusPrior::new(cfg.nucleus_prior)?;
    let t = match thresholding::modified_otsu(&p, prior) {
        Ok(r) => r.t,
        Err(Error::DegenerateDistribution) => return Ok((LabelMap::new(w, h), Vec::new())),
        Err(e) => return Err(e),
    };
    let mask = thresholding::apply_threshold(preprocessed, t, Some(clump))?;
    let mut filled = morphology::fill_holes(&mask);
    filled.intersect_with(clump);
    let labels = morphology::connected_components(&filled, 8)?;
    let labels = morphology::remove_small_components(&labels, cfg.min_nucleus_area);
    let mut sums = vec![(0f64, 0f64, 0usize); labels.n_labels as usize];
    for y in 0..h {
        for x in 0..w {
            let l = labels.data[y * w + x];
            if l > 0 {
                let s = &mut sums[(l - 1) as usize];
                s.0 += x as f64;
                s.1 += y as f64;
                s.2 += 1;
            }
        }
    }
    let centroids = sums
        .iter()
        .map(|&(sx, sy, n)| (sx / n as f64, sy / n as f64))
        .collect();
    Ok((labels, centroids))
}

fn dilate_disc(mask: &Mask, r: usize) -> Mask {
    let ri = r as isize;
    let mut offsets: Vec<(isize, isize)> = Vec::new();
    for dy in -ri..=ri {
        for dx in -ri..=ri {
            if dx * dx + dy * dy <= ri * ri {
                offsets.push((dx, dy));
            }
        }
    }
    let (w, h) = (mask.width, mask.height);
    let mut out = Mask::new(w, h);
    for y in 0..h {
        for x in 0..w {
            if !mask.data[y * w + x] {
                continue;
            }
            for &(dx, dy) in &offsets {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                    out.data[ny as usize * w + nx as usize] = true;
                }
            }
        }
    }
    out
}

/// Contour evolution for one nucleus of a multi-nucleus clump, reporting
/// iteration count and convergence for provenance.
fn evolve_cell(
    edge_source: &GrayImage,
    clump: &Mask,
    nucleus: &Mask,
    cfg: &PipelineConfig,
) -> Result<(Mask, usize, bool)> {
    let g = levelset::edge_indicator(edge_source, cfg.drlse.sigma)?;
    let mut seed = dilate_disc(nucleus, cfg.init_disc_margin);
    seed.intersect_with(clump);
    let phi0 = levelset::init_phi(clump.width, clump.height, &seed, cfg.drlse.c0)?;
    let forbidden = clump.invert();
    let (phi, iters, converged) = levelset::drlse_run(&phi0, &g, &cfg.drlse, Some(&forbidden))?;
    let mut cell = levelset::zero_sublevel_mask(&phi);
    cell.union_with(nucleus);
    Ok((cell, iters, converged))
}

/// Cytoplasm recovery for one nucleus. A clump holding a single nucleus is
/// itself the cell; otherwise the contour grows from the dilated nucleus,
/// confined to the clump, and the result always contains the nucleus.
pub fn segment_cell(
    preprocessed: &GrayImage,
    clump: &Mask,
    nucleus: &Mask,
    cfg: &PipelineConfig,
    n_nuclei_in_clump: usize,
) -> Result<Mask> {
    cfg.validate()?;
    if n_nuclei_in_clump == 0 {
        return Err(Error::InvalidParam(
            "clump must contain at least one nucleus".into(),
        ));
    }
    if !nucleus.same_dims(clump) {
        return Err(Error::DimensionMismatch(
            clump.width,
            clump.height,
            nucleus.width,
            nucleus.height,
        ));
    }
    if !nucleus.subset_of(clump) {
        return Err(Error::NucleusOutsideClump);
    }
    if n_nuclei_in_clump == 1 {
        return Ok(clump.clone());
    }
    let (cell, _, _) = evolve_cell(preprocessed, clump, nucleus, cfg)?;
    Ok(cell)
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1000.0
}

/// Runs the whole chain on a focus stack (a single image is passed through
/// unfused). Nuclei are relabeled globally in (clump label, local nucleus
/// label) order; cells follow the same order. Clumps with no detected
/// nucleus stay in the clump map but produce no cells.
///
/// The contour stage reads its edges from the median-filtered image: the
/// equalized image amplifies flat-region noise enough to stall contours,
/// while nucleus thresholding needs exactly that amplification.
pub fn run_pipeline(stack: &[GrayImage], cfg: &PipelineConfig) -> Result<SegmentationResult> {
    cfg.validate()?;
    let mut stage_ms: Vec<(String, f64)> = Vec::new();

    let t = Instant::now();
    let fused = if stack.len() == 1 {
        stack[0].clone()
    } else {
        edf_fuse(stack, cfg.edf_window)?
    };
    stage_ms.push(("fuse".into(), ms(t)));

    let t = Instant::now();
    let (clumps, pre) = segment_clumps(&fused, cfg)?;
    stage_ms.push(("clumps".into(), ms(t)));

    let t = Instant::now();
    let (w, h) = (fused.width, fused.height);
    let mut per_clump: Vec<(u32, LabelMap)> = Vec::new();
    let mut centroids: Vec<(f64, f64)> = Vec::new();
    for ci in 1..=clumps.n_labels {
        let cm = clumps.mask_of(ci);
        let (local, cents) = segment_nuclei(&pre, &cm, cfg)?;
        centroids.extend(cents);
        per_clump.push((ci, local));
    }
    stage_ms.push(("nuclei".into(), ms(t)));

    let t = Instant::now();
    let edge_source = preprocess::median_filter(&fused, cfg.median_kernel)?;
    let mut nuclei = LabelMap::new(w, h);
    let mut cells: Vec<Mask> = Vec::new();
    let mut cell_runs: Vec<CellRun> = Vec::new();
    let mut next_label = 0u32;
    for (ci, local) in &per_clump {
        let nn = local.n_labels as usize;
        if nn == 0 {
            continue;
        }
        let cm = clumps.mask_of(*ci);
        for ni in 1..=local.n_labels {
            next_label += 1;
            for (g, &l) in nuclei.data.iter_mut().zip(&local.data) {
                if l == ni {
                    *g = next_label;
                }
            }
            if nn == 1 {
                cells.push(cm.clone());
                cell_runs.push(CellRun {
                    clump_label: *ci,
                    nucleus_label: next_label,
                    iters: 0,
                    converged: true,
                });
            } else {
                let nm = local.mask_of(ni);
                let (cell, iters, converged) = evolve_cell(&edge_source, &cm, &nm, cfg)?;
                cells.push(cell);
                cell_runs.push(CellRun {
                    clump_label: *ci,
                    nucleus_label: next_label,
                    iters,
                    converged,
                });
            }
        }
    }
    nuclei.n_labels = next_label;
    stage_ms.push(("cells".into(), ms(t)));

    Ok(SegmentationResult {
        clumps,
        nuclei,
        nucleus_centroids: centroids,
        cells,
        provenance: Provenance {
            config: cfg.clone(),
            stage_ms,
            cell_runs,
        },
    })
}
