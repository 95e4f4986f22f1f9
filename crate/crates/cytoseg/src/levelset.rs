//! Distance-regularized level-set evolution: a contour seeded inside each
//! nucleus expands under a balloon force and locks onto cytoplasm edges.

use crate::error::{Error, Result};
use crate::preprocess::gaussian_smooth;
use crate::raster::{GrayImage, Mask, ScalarField};

/// Level-set function; the contour is the zero crossing, negative = interior.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetField {
    pub width: usize,
    pub height: usize,
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrlseParams {
    pub mu: f64,
    pub lambda: f64,
    pub balloon: f64,
    pub epsilon: f64,
    pub dt: f64,
    pub c0: f64,
    pub sigma: f64,
    pub max_iters: usize,
    pub check_every: usize,
    pub converge_frac: f64,
}

impl Default for DrlseParams {
    fn default() -> Self {
        DrlseParams {
            mu: 0.04,
            lambda: 5.0,
            balloon: -1.5,
            epsilon: 1.5,
            dt: 5.0,
            c0: 2.0,
            sigma: 1.5,
            max_iters: 600,
            check_every: 10,
            converge_frac: 0.001,
        }
    }
}

impl DrlseParams {
    pub fn validate(&self) -> Result<()> {
        if self.mu * self.dt >= 0.25 {
            return Err(Error::UnstableTimeStep(self.mu * self.dt));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.epsilon) || !positive(self.c0) || !positive(self.sigma) || !positive(self.dt)
        {
            return Err(Error::InvalidParam(
                "epsilon, c0, sigma and dt must all be positive".into(),
            ));
        }
        if self.check_every == 0 {
            return Err(Error::InvalidParam("check_every must be >= 1".into()));
        }
        Ok(())
    }
}

#[inline]
fn clamp_idx(v: isize, max: usize) -> usize {
    v.clamp(0, max as isize - 1) as usize
}

/// Central differences with replicated borders, so the first derivative at
/// the edge sees (f[1] - f[0]) / 2.
fn grad_c(f: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let mut px = vec![0.0f64; w * h];
    let mut py = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let x0 = x.saturating_sub(1);
            let x1 = (x + 1).min(w - 1);
            let y0 = y.saturating_sub(1);
            let y1 = (y + 1).min(h - 1);
            px[y * w + x] = (f[y * w + x1] - f[y * w + x0]) / 2.0;
            py[y * w + x] = (f[y1 * w + x] - f[y0 * w + x]) / 2.0;
        }
    }
    (px, py)
}

fn div_c(u: &[f64], v: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let x0 = x.saturating_sub(1);
            let x1 = (x + 1).min(w - 1);
            let y0 = y.saturating_sub(1);
            let y1 = (y + 1).min(h - 1);
            out[y * w + x] =
                (u[y * w + x1] - u[y * w + x0]) / 2.0 + (v[y1 * w + x] - v[y0 * w + x]) / 2.0;
        }
    }
    out
}

/// Compact 4-neighbor Laplacian with replicated borders.
fn lap4(f: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let c = f[y as usize * w + x as usize];
            let l = f[y as usize * w + clamp_idx(x - 1, w)];
            let r = f[y as usize * w + clamp_idx(x + 1, w)];
            let u = f[clamp_idx(y - 1, h) * w + x as usize];
            let d = f[clamp_idx(y + 1, h) * w + x as usize];
            out[y as usize * w + x as usize] = l + r + u + d - 4.0 * c;
        }
    }
    out
}

/// Derivative ratio p'(s)/s of the double-well regularization potential.
#[inline]
fn dp_ratio(s: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else if s <= 1.0 {
        let a = 2.0 * std::f64::consts::PI * s;
        a.sin() / a
    } else {
        (s - 1.0) / s
    }
}

/// Smoothed Dirac delta of width epsilon.
#[inline]
fn delta_eps(x: f64, eps: f64) -> f64 {
    if x.abs() <= eps {
        (1.0 + (std::f64::consts::PI * x / eps).cos()) / (2.0 * eps)
    } else {
        0.0
    }
}

/// g = 1 / (1 + |grad(G_sigma * I)|^2) on the raw intensity scale.
/// Approaches 0 at strong edges, exactly 1 on constant regions.
pub fn edge_indicator(image: &GrayImage, sigma: f64) -> Result<ScalarField> {
    let field = ScalarField::from_image(image);
    let smooth = gaussian_smooth(&field, sigma)?;
    let (px, py) = grad_c(&smooth.data, image.width, image.height);
    let data = px
        .iter()
        .zip(&py)
        .map(|(&gx, &gy)| 1.0 / (1.0 + gx * gx + gy * gy))
        .collect();
    Ok(ScalarField {
        width: image.width,
        height: image.height,
        data,
    })
}

/// Binary-step initialization: -c0 on the seed, +c0 elsewhere.
pub fn init_phi(width: usize, height: usize, seed: &Mask, c0: f64) -> Result<LevelSetField> {
    if seed.width != width || seed.height != height {
        return Err(Error::DimensionMismatch(width, height, seed.width, seed.height));
    }
    if !seed.any() {
        return Err(Error::EmptySeed);
    }
    Ok(LevelSetField {
        width,
        height,
        phi: seed.data.iter().map(|&s| if s { -c0 } else { c0 }).collect(),
    })
}

pub fn zero_sublevel_mask(phi: &LevelSetField) -> Mask {
    Mask {
        width: phi.width,
        height: phi.height,
        data: phi.phi.iter().map(|&v| v < 0.0).collect(),
    }
}

fn check_dims(phi: &LevelSetField, g: &ScalarField, forbidden: Option<&Mask>) -> Result<()> {
    if g.width != phi.width || g.height != phi.height {
        return Err(Error::DimensionMismatch(phi.width, phi.height, g.width, g.height));
    }
    if let Some(f) = forbidden {
        if f.width != phi.width || f.height != phi.height {
            return Err(Error::DimensionMismatch(phi.width, phi.height, f.width, f.height));
        }
    }
    Ok(())
}

fn step_inner(
    phi: &LevelSetField,
    g: &ScalarField,
    vx: &[f64],
    vy: &[f64],
    params: &DrlseParams,
    forbidden: Option<&Mask>,
) -> LevelSetField {
    let (w, h) = (phi.width, phi.height);
    let (px, py) = grad_c(&phi.phi, w, h);
    let n = w * h;
    let mut nx = vec![0.0f64; n];
    let mut ny = vec![0.0f64; n];
    let mut s = vec![0.0f64; n];
    for i in 0..n {
        s[i] = (px[i] * px[i] + py[i] * py[i]).sqrt();
        nx[i] = px[i] / (s[i] + 1e-10);
        ny[i] = py[i] / (s[i] + 1e-10);
    }
    let curv = div_c(&nx, &ny, w, h);
    let mut ru = vec![0.0f64; n];
    let mut rv = vec![0.0f64; n];
    for i in 0..n {
        let d = dp_ratio(s[i]) - 1.0;
        ru[i] = d * px[i];
        rv[i] = d * py[i];
    }
    let reg_div = div_c(&ru, &rv, w, h);
    let lap = lap4(&phi.phi, w, h);
    let mut out = vec![0.0f64; n];
    for i in 0..n {
        let delta = delta_eps(phi.phi[i], params.epsilon);
        let distreg = reg_div[i] + lap[i];
        let edge = delta * (vx[i] * nx[i] + vy[i] * ny[i]) + delta * g.data[i] * curv[i];
        let area = params.balloon * g.data[i] * delta;
        out[i] = phi.phi[i]
            + params.dt * (params.mu * distreg + params.lambda * edge + area);
    }
    if let Some(f) = forbidden {
        for (o, &fb) in out.iter_mut().zip(&f.data) {
            if fb {
                *o = params.c0;
            }
        }
    }
    LevelSetField {
        width: w,
        height: h,
        phi: out,
    }
}

/// One explicit update of the evolution equation. Where forbidden is set,
/// phi is pinned to +c0 after the update (hard confinement barrier).
pub fn drlse_step(
    phi: &LevelSetField,
    g: &ScalarField,
    params: &DrlseParams,
    forbidden: Option<&Mask>,
) -> Result<LevelSetField> {
    params.validate()?;
    check_dims(phi, g, forbidden)?;
    let (vx, vy) = grad_c(&g.data, g.width, g.height);
    Ok(step_inner(phi, g, &vx, &vy, params, forbidden))
}

/// Iterates drlse_step, testing the zero-sublevel mask against the previous
/// checkpoint every check_every steps; stops when the changed-pixel fraction
/// drops below converge_frac.
pub fn drlse_run(
    phi0: &LevelSetField,
    g: &ScalarField,
    params: &DrlseParams,
    forbidden: Option<&Mask>,
) -> Result<(LevelSetField, usize, bool)> {
    params.validate()?;
    check_dims(phi0, g, forbidden)?;
    let (vx, vy) = grad_c(&g.data, g.width, g.height);
    let size = (phi0.width * phi0.height) as f64;
    let mut phi = phi0.clone();
    let mut prev = zero_sublevel_mask(&phi);
    for it in 1..=params.max_iters {
        phi = step_inner(&phi, g, &vx, &vy, params, forbidden);
        if it % params.check_every == 0 {
            let cur = zero_sublevel_mask(&phi);
            let changed = cur
                .data
                .iter()
                .zip(&prev.data)
                .filter(|(a, b)| a != b)
                .count();
            if (changed as f64) / size < params.converge_frac {
                return Ok((phi, it, true));
            }
            prev = cur;
        }
    }
    let iters = params.max_iters;
    Ok((phi, iters, false))
}
