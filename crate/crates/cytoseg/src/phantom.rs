//! Deterministic synthetic specimens: overlapping ellipse cells with dark
//! nuclei on a bright background, plus fixed fixtures for the test suite.
//!
//! All placement arithmetic is integer/fixed-point (scale 2^16) so phantoms
//! are reproducible across platforms; floating point enters only through the
//! additive noise, drawn from the splitmix64 generator documented here.

use crate::error::{Error, Result};
use crate::raster::{GrayImage, Mask};

/// splitmix64: state advances by 0x9E3779B97F4A7C15; output mixes the state
/// with two xor-multiply rounds (0xBF58476D1CE4E5B9, 0x94D049BB133111EB).
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform-ish integer in [lo, hi] inclusive via modulo.
    pub fn next_range(&mut self, lo: i64, hi: i64) -> i64 {
        let span = (hi - lo + 1) as u64;
        lo + (self.next_u64() % span) as i64
    }

    /// Uniform in (0, 1]: 53-bit mantissa, never zero.
    pub fn next_f64(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (2.0f64).powi(-53)
    }

    /// Standard normal via the Box-Muller cosine branch; two fresh uniform
    /// draws per call, nothing cached.
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// cos/sin of k*22.5 deg, scaled by 2^16.
pub const DIR_TABLE: [(i64, i64); 16] = [
    (65536, 0),
    (60547, 25080),
    (46341, 46341),
    (25080, 60547),
    (0, 65536),
    (-25080, 60547),
    (-46341, 46341),
    (-60547, 25080),
    (-65536, 0),
    (-60547, -25080),
    (-46341, -46341),
    (-25080, -60547),
    (0, -65536),
    (25080, -60547),
    (46341, -46341),
    (60547, -25080),
];

/// cos/sin of k*11.25 deg over [0, 180), scaled by 2^16.
pub const ROT_TABLE: [(i64, i64); 16] = [
    (65536, 0),
    (64277, 12785),
    (60547, 25080),
    (54491, 36410),
    (46341, 46341),
    (36410, 54491),
    (25080, 60547),
    (12785, 64277),
    (0, 65536),
    (-12785, 64277),
    (-25080, 60547),
    (-36410, 54491),
    (-46341, 46341),
    (-54491, 36410),
    (-60547, 25080),
    (-64277, 12785),
];

/// Chord factor 2*sin(j*11.25 deg), scaled by 2^16, for angular gaps of
/// j direction steps.
pub const CHORD_TABLE: [i64; 17] = [
    0, 25571, 50159, 72820, 92682, 108982, 121095, 128553, 131072, 128553, 121095, 108982, 92682,
    72820, 50159, 25571, 0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub n_cells: usize,
    /// 0 = disjoint cells, 1 = tightly stacked; controls centroid spacing.
    pub overlap_level: f64,
    pub cytoplasm_level: u8,
    pub nucleus_level: u8,
    pub background_level: u8,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            width: 512,
            height: 512,
            n_cells: 3,
            overlap_level: 0.3,
            cytoplasm_level: 75,
            nucleus_level: 25,
            background_level: 215,
            noise_sigma: 4.0,
            seed: 42,
        }
    }
}

const AXIS_LO: i64 = 40;
const AXIS_HI: i64 = 90;
const ATTENUATION: f64 = 0.85;

/// Filled rotated ellipse. The membership test is exact in i128:
/// (u/2^16)^2/a^2 + (v/2^16)^2/b^2 <= 1 with (u,v) the fixed-point rotation
/// of the pixel offset.
pub fn rasterize_ellipse(
    w: usize,
    h: usize,
    cx: i64,
    cy: i64,
    a: i64,
    b: i64,
    rot_idx: usize,
) -> Mask {
    let (cos_f, sin_f) = ROT_TABLE[rot_idx % 16];
    let rhs = ((a as i128 * a as i128) * (b as i128 * b as i128)) << 32;
    let mut m = Mask::new(w, h);
    for y in 0..h {
        let dy = y as i64 - cy;
        for x in 0..w {
            let dx = x as i64 - cx;
            let u = (dx * cos_f + dy * sin_f) as i128;
            let v = (-dx * sin_f + dy * cos_f) as i128;
            let lhs = u * u * (b as i128 * b as i128) + v * v * (a as i128 * a as i128);
            if lhs <= rhs {
                m.data[y * w + x] = true;
            }
        }
    }
    m
}

#[inline]
fn round_half_up_div(n: i64, d: i64) -> i64 {
    // round(n/d) for positive d, halves up
    (2 * n + d).div_euclid(2 * d)
}

/// Draws the phantom: `n_cells` rotated ellipses around the image center with
/// spacing shrunk by overlap_level, stacked-region attenuation 0.85 per extra
/// covering cell, one dark nucleus per cell (disjoint from the others), and
/// optional Gaussian noise. Fully deterministic given the spec.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<(GrayImage, Vec<Mask>, Vec<Mask>)> {
    if spec.n_cells < 1 {
        return Err(Error::InvalidParam("n_cells must be >= 1".into()));
    }
    if !(spec.nucleus_level < spec.cytoplasm_level
        && spec.cytoplasm_level < spec.background_level)
    {
        return Err(Error::InvalidParam(
            "levels must satisfy nucleus < cytoplasm < background".into(),
        ));
    }
    if spec.width < 4 * AXIS_HI as usize || spec.height < 4 * AXIS_HI as usize {
        return Err(Error::InvalidParam(format!(
            "image must be at least {0}x{0} to hold cells",
            4 * AXIS_HI
        )));
    }
    if !(0.0..=1.0).contains(&spec.overlap_level) {
        return Err(Error::InvalidParam(
            "overlap_level must lie in [0, 1]".into(),
        ));
    }
    let (w, h, n) = (spec.width, spec.height, spec.n_cells);
    let mut rng = SplitMix64::new(spec.seed);
    let (cxc, cyc) = ((w / 2) as i64, (h / 2) as i64);

    let mut axes: Vec<(i64, i64)> = Vec::with_capacity(n);
    let mut rots: Vec<usize> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut a = rng.next_range(AXIS_LO, AXIS_HI);
        let mut b = rng.next_range(AXIS_LO, AXIS_HI);
        if b > a {
            std::mem::swap(&mut a, &mut b);
        }
        let rot = rng.next_range(0, 15) as usize;
        axes.push((a, b));
        rots.push(rot);
    }

    // ring placement: radius interpolates between rho_far (just disjoint)
    // and b-6 (deep overlap); the quarter-power ramp makes small overlap
    // levels already produce contact
    let ov_milli = (spec.overlap_level * 1000.0).round().clamp(0.0, 1000.0) as i64;
    let t1000 = isqrt(isqrt(ov_milli as u128 * 1_000_000_000) as u128) as i64;
    let rho_far = if n > 1 {
        let step = round_half_up_div(16, n as i64).max(1);
        let gap_steps = step.min(8) as usize;
        let chord = CHORD_TABLE[gap_steps];
        let mut majors: Vec<i64> = axes.iter().map(|&(a, _)| a).collect();
        majors.sort_unstable_by(|x, y| y.cmp(x));
        let need = majors[0] + majors[1] + 14;
        (need * 65536 + chord - 1).div_euclid(chord)
    } else {
        0
    };

    let mut centers: Vec<(i64, i64)> = Vec::with_capacity(n);
    for (i, &(a, b)) in axes.iter().enumerate() {
        let _jitter = rng.next_range(0, 2) - 1;
        let didx = (round_half_up_div(16 * i as i64, n as i64) % 16) as usize;
        let rho_near = (b - 6).max(0);
        let mut rho = ((1000 - t1000) * rho_far + t1000 * rho_near).div_euclid(1000);
        rho = rho.min((w.min(h) / 2) as i64 - a - 8).max(0);
        let (dxf, dyf) = DIR_TABLE[didx];
        let cx = cxc + (dxf * rho + if dxf >= 0 { 32768 } else { -32768 }).div_euclid(65536);
        let cy = cyc + (dyf * rho + if dyf >= 0 { 32768 } else { -32768 }).div_euclid(65536);
        centers.push((cx, cy));
    }

    let cells: Vec<Mask> = (0..n)
        .map(|i| {
            let (a, b) = axes[i];
            rasterize_ellipse(w, h, centers[i].0, centers[i].1, a, b, rots[i])
        })
        .collect();

    // nuclei: area fraction 3-8% of the cell, aspect 1.0-1.6, same rotation
    // as the cell, random offset; retried until contained and disjoint
    let mut nuclei: Vec<Mask> = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = axes[i];
        let mut placed: Option<Mask> = None;
        let mut last_size = (2i64, 2i64);
        for _attempt in 0..32 {
            let f_milli = rng.next_range(30, 80);
            let r_centi = rng.next_range(100, 160);
            let area2 = f_milli * a * b;
            let na = ((area2 * r_centi) as f64 / 100.0 / 1000.0).sqrt();
            let nb = ((area2 * 100) as f64 / r_centi as f64 / 1000.0).sqrt();
            let na_i = (na.round() as i64).max(2);
            let nb_i = (nb.round() as i64).max(2);
            last_size = (na_i, nb_i);
            let max_off = (b - nb_i - 4).max(0);
            let off = if max_off > 0 {
                rng.next_range(0, max_off)
            } else {
                0
            };
            let odir = rng.next_range(0, 15) as usize;
            let (dxf, dyf) = DIR_TABLE[odir];
            let ncx = centers[i].0 + (dxf * off).div_euclid(65536);
            let ncy = centers[i].1 + (dyf * off).div_euclid(65536);
            let m = rasterize_ellipse(w, h, ncx, ncy, na_i, nb_i, rots[i]);
            if !m.any() || !m.subset_of(&cells[i]) {
                continue;
            }
            if nuclei.iter().any(|n2| overlaps(&m, n2)) {
                continue;
            }
            placed = Some(m);
            break;
        }
        let placed = match placed {
            Some(m) => m,
            None => {
                let m = rasterize_ellipse(
                    w,
                    h,
                    centers[i].0,
                    centers[i].1,
                    last_size.0,
                    last_size.1,
                    rots[i],
                );
                if nuclei.iter().any(|n2| overlaps(&m, n2)) || !m.subset_of(&cells[i]) {
                    return Err(Error::PhantomPlacement(i));
                }
                m
            }
        };
        nuclei.push(placed);
    }

    let mut img = vec![spec.background_level as f64; w * h];
    let mut cover = vec![0u32; w * h];
    for c in &cells {
        for (cv, &m) in cover.iter_mut().zip(&c.data) {
            *cv += u32::from(m);
        }
    }
    let max_cover = cover.iter().copied().max().unwrap_or(0);
    let mut level = spec.cytoplasm_level as f64;
    for k in 1..=max_cover {
        let value = level.round();
        for (px, &cv) in img.iter_mut().zip(&cover) {
            if cv == k {
                *px = value;
            }
        }
        level *= ATTENUATION;
    }
    for nmask in &nuclei {
        for (px, &m) in img.iter_mut().zip(&nmask.data) {
            if m {
                *px = spec.nucleus_level as f64;
            }
        }
    }
    if spec.noise_sigma > 0.0 {
        for px in img.iter_mut() {
            *px += spec.noise_sigma * rng.next_gaussian();
        }
    }
    let data: Vec<u8> = img
        .iter()
        .map(|&v| v.round_ties_even().clamp(0.0, 255.0) as u8)
        .collect();
    Ok((GrayImage::from_data(w, h, data), cells, nuclei))
}

fn overlaps(a: &Mask, b: &Mask) -> bool {
    a.data.iter().zip(&b.data).any(|(&x, &y)| x && y)
}

fn isqrt(v: u128) -> u64 {
    if v == 0 {
        return 0;
    }
    let mut x = (v as f64).sqrt() as u128;
    while x * x > v {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= v {
        x += 1;
    }
    x as u64
}

/// Fixed 160x160 single-clump scene for threshold-bias checks: one ellipse
/// clump whose cytoplasm brightness ramps horizontally from 90 to 209 on a
/// 245 background, with a textured dark nucleus (levels 26..=33) occupying
/// about 5.6% of the clump. The intensity ramp gives the bright class a
/// large spread, which drags a plain within-class-variance threshold far
/// into the cytoplasm range, while the dark-prior reweighting does not move.
pub fn gradient_clump_fixture() -> (GrayImage, Mask, Mask) {
    let (w, h) = (160usize, 160usize);
    let clump = rasterize_ellipse(w, h, 80, 80, 70, 55, 0);
    let nucleus = rasterize_ellipse(w, h, 52, 68, 18, 12, 2);
    let mut data = vec![245u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if nucleus.data[i] {
                data[i] = 26 + ((x + y) % 8) as u8;
            } else if clump.data[i] {
                data[i] = (90 + x * 120 / w) as u8;
            }
        }
    }
    (GrayImage::from_data(w, h, data), clump, nucleus)
}
