//! Denoising and contrast normalization: median filter, contrast-limited
//! adaptive histogram equalization, and Gaussian smoothing.

use crate::error::{Error, Result};
use crate::raster::{GrayImage, ScalarField};

/// k×k median with edge-replicated borders.
pub fn median_filter(image: &GrayImage, k: usize) -> Result<GrayImage> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::InvalidParam(format!(
            "median window must be odd and positive, got {k}"
        )));
    }
    let r = (k / 2) as isize;
    let (w, h) = (image.width, image.height);
    let mut out = vec![0u8; w * h];
    let mut window: Vec<u8> = Vec::with_capacity(k * k);
    for y in 0..h as isize {
        for x in 0..w as isize {
            window.clear();
            for dy in -r..=r {
                let sy = (y + dy).clamp(0, h as isize - 1) as usize;
                for dx in -r..=r {
                    let sx = (x + dx).clamp(0, w as isize - 1) as usize;
                    window.push(image.data[sy * w + sx]);
                }
            }
            window.sort_unstable();
            out[y as usize * w + x as usize] = window[window.len() / 2];
        }
    }
    Ok(GrayImage::from_data(w, h, out))
}

/// Contrast-limited adaptive histogram equalization on a tiles×tiles grid.
///
/// Each tile gets a clipped-histogram CDF mapping; clipped excess is
/// redistributed uniformly across bins. Output pixels blend the four
/// surrounding tile mappings bilinearly.
pub fn adaptive_hist_eq(image: &GrayImage, tiles: usize, clip: f64) -> Result<GrayImage> {
    if tiles < 1 {
        return Err(Error::InvalidParam("tiles must be >= 1".into()));
    }
    if !(clip > 0.0 && clip <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "clip must be in (0, 1], got {clip}"
        )));
    }
    let (w, h) = (image.width, image.height);
    let levels = image.l_max as usize + 1;
    let l_max = image.l_max as u64;
    let tw = w.div_ceil(tiles);
    let th = h.div_ceil(tiles);
    let area = (tw * th) as u64;
    let limit = ((clip * area as f64).ceil() as u64).max(1);

    // per-tile LUTs; tile reads clamp to the image so border tiles
    // re-sample edge pixels
    let mut luts = vec![0u8; tiles * tiles * levels];
    let mut hist = vec![0u64; levels];
    for ty in 0..tiles {
        for tx in 0..tiles {
            hist.iter_mut().for_each(|c| *c = 0);
            for yy in ty * th..(ty + 1) * th {
                let sy = yy.min(h - 1);
                for xx in tx * tw..(tx + 1) * tw {
                    let sx = xx.min(w - 1);
                    hist[image.data[sy * w + sx] as usize] += 1;
                }
            }
            let mut excess = 0u64;
            for c in hist.iter_mut() {
                if *c > limit {
                    excess += *c - limit;
                    *c = limit;
                }
            }
            let add = excess / levels as u64;
            let rem = (excess % levels as u64) as usize;
            for (b, c) in hist.iter_mut().enumerate() {
                *c += add + u64::from(b < rem);
            }
            let lut = &mut luts[(ty * tiles + tx) * levels..][..levels];
            let mut cdf = 0u64;
            for (b, &c) in hist.iter().enumerate() {
                cdf += c;
                // round-half-up of cdf * l_max / area
                lut[b] = ((2 * cdf * l_max + area) / (2 * area)) as u8;
            }
        }
    }

    let mut out = vec![0u8; w * h];
    let tile_coord = |p: usize, tside: usize| -> (usize, usize, f64) {
        let tf = (p as f64 + 0.5) / tside as f64 - 0.5;
        let i0 = (tf.floor() as isize).clamp(0, tiles as isize - 1) as usize;
        let i1 = (i0 + 1).min(tiles - 1);
        let f = if tf < 0.0 {
            0.0
        } else if tf > tiles as f64 - 1.0 {
            1.0
        } else {
            tf - tf.floor()
        };
        (i0, i1, f)
    };
    for y in 0..h {
        let (j0, j1, fy) = tile_coord(y, th);
        for x in 0..w {
            let (i0, i1, fx) = tile_coord(x, tw);
            let v = image.data[y * w + x] as usize;
            let m00 = luts[(j0 * tiles + i0) * levels + v] as f64;
            let m01 = luts[(j0 * tiles + i1) * levels + v] as f64;
            let m10 = luts[(j1 * tiles + i0) * levels + v] as f64;
            let m11 = luts[(j1 * tiles + i1) * levels + v] as f64;
            let blend = (1.0 - fy) * ((1.0 - fx) * m00 + fx * m01)
                + fy * ((1.0 - fx) * m10 + fx * m11);
            out[y * w + x] = blend.round().clamp(0.0, image.l_max as f64) as u8;
        }
    }
    Ok(GrayImage::from_data(w, h, out))
}

/// Normalized 1-D Gaussian taps at integer offsets -r..=r, r = ceil(3σ).
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let r = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i as f64 * i as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    Ok(k)
}

/// Separable Gaussian blur with edge-replicated borders.
pub fn gaussian_smooth(field: &ScalarField, sigma: f64) -> Result<ScalarField> {
    let kernel = gaussian_kernel(sigma)?;
    let r = (kernel.len() / 2) as isize;
    let (w, h) = (field.width, field.height);
    let mut tmp = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for (ki, &kv) in kernel.iter().enumerate() {
                let sx = (x + ki as isize - r).clamp(0, w as isize - 1) as usize;
                acc += kv * field.data[y * w + sx];
            }
            tmp[y * w + x as usize] = acc;
        }
    }
    let mut out = vec![0.0f64; w * h];
    for y in 0..h as isize {
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, &kv) in kernel.iter().enumerate() {
                let sy = (y + ki as isize - r).clamp(0, h as isize - 1) as usize;
                acc += kv * tmp[sy * w + x];
            }
            out[y as usize * w + x] = acc;
        }
    }
    Ok(ScalarField {
        width: w,
        height: h,
        data: out,
    })
}
