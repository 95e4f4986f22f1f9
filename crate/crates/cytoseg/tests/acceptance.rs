//! Release gate: one test per shipped guarantee. Every test prints a
//! `criterion N: PASS` line on success; a failing guarantee prints the
//! measured value before the assertion fires, so the verdict survives in the
//! captured output.

use cytoseg::levelset::{
    drlse_run, drlse_step, edge_indicator, init_phi, zero_sublevel_mask, DrlseParams,
    LevelSetField,
};
use cytoseg::metrics::{dice, evaluate, match_cells, object_fno, pixel_rates, MatchEntry};
use cytoseg::morphology::{
    connected_components, fill_holes, reconstruct_dilation, reconstruct_dilation_naive,
    regional_minima,
};
use cytoseg::phantom::{generate_phantom, gradient_clump_fixture, PhantomSpec, SplitMix64};
use cytoseg::pipeline::{run_pipeline, segment_nuclei, PipelineConfig};
use cytoseg::raster::{GrayImage, Mask, ProbDist, ScalarField};
use cytoseg::thresholding::{
    modified_otsu, otsu, reweight_distribution, within_class_variance, NucleusPrior,
};
use cytoseg::Error;
use std::time::Instant;

fn seeded_distributions(n: usize) -> Vec<ProbDist> {
    let mut rng = SplitMix64::new(0x0acce);
    (0..n)
        .map(|_| {
            let mut counts = vec![0u64; 256];
            for c in counts.iter_mut() {
                if !rng.next_u64().is_multiple_of(3) {
                    *c = rng.next_u64() % 997;
                }
            }
            let occupied = counts.iter().filter(|&&c| c > 0).count();
            assert!(occupied >= 2, "fixture turned degenerate; reseed");
            let total: u64 = counts.iter().sum();
            ProbDist {
                probs: counts.iter().map(|&c| c as f64 / total as f64).collect(),
            }
        })
        .collect()
}

#[test]
fn criterion_01_threshold_matches_exhaustive_search() {
    let dists = seeded_distributions(200);
    let start = Instant::now();
    for (k, p) in dists.iter().enumerate() {
        let fast = otsu(p).unwrap();
        let mut best: Option<(u8, f64)> = None;
        for t in 0..=254u8 {
            if let Ok(obj) = within_class_variance(p, t) {
                match best {
                    Some((_, b)) if b <= obj => {}
                    _ => best = Some((t, obj)),
                }
            }
        }
        let (bt, bobj) = best.unwrap();
        assert_eq!(fast.t, bt, "histogram {k}");
        assert_eq!(fast.objective, bobj, "histogram {k}");
    }
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 1.0, "200 histograms took {secs:.3} s");
    println!("criterion 1: PASS (200 histograms in {:.0} ms)", secs * 1e3);
}

#[test]
fn criterion_02_half_prior_is_identity_and_reweight_normalizes() {
    let dists = seeded_distributions(200);
    for (k, p) in dists.iter().enumerate() {
        let plain = otsu(p).unwrap();
        let half = modified_otsu(p, NucleusPrior { alpha: 0.5 }).unwrap();
        assert_eq!(plain.t, half.t, "histogram {k}");
        for alpha in [0.02, 0.05, 0.3, 0.5, 0.9] {
            let rw = reweight_distribution(p, NucleusPrior { alpha }).unwrap();
            assert!(rw.probs.iter().all(|&q| q >= 0.0));
            let sum: f64 = rw.probs.iter().sum();
            assert!(
                (sum - 1.0).abs() <= 1e-9,
                "histogram {k}, alpha {alpha}: sum {sum}"
            );
        }
    }
    println!("criterion 2: PASS");
}

/// Bimodal mixture with 3% of the mass in a tight dark mode (mean 40, sd 8)
/// and the rest in a broad bright mode (mean 160, sd 20).
fn skewed_bimodal() -> ProbDist {
    let mut probs = vec![0.0f64; 256];
    let tau = (2.0 * std::f64::consts::PI).sqrt();
    for (i, q) in probs.iter_mut().enumerate() {
        let x = i as f64;
        let n1 = (-(x - 40.0) * (x - 40.0) / 128.0).exp() / (8.0 * tau);
        let n2 = (-(x - 160.0) * (x - 160.0) / 800.0).exp() / (20.0 * tau);
        *q = 0.03 * n1 + 0.97 * n2;
    }
    let s: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|q| *q /= s);
    ProbDist { probs }
}

#[test]
fn criterion_03_dark_prior_corrects_skewed_threshold() {
    let p = skewed_bimodal();
    let t_std = otsu(&p).unwrap().t;
    let t_mod = modified_otsu(&p, NucleusPrior { alpha: 0.05 }).unwrap().t;
    assert_eq!(t_std, 101);
    assert_eq!(t_mod, 94);
    assert!(40 < t_mod && t_mod < 160, "threshold {t_mod} not between modes");
    assert!(t_mod < t_std, "prior failed to lower {t_std} -> {t_mod}");

    let (img, clump, nucleus) = gradient_clump_fixture();
    let gt = nucleus.count() as f64;
    let cfg = PipelineConfig::default();
    let (labels, _) = segment_nuclei(&img, &clump, &cfg).unwrap();
    let area = labels.data.iter().filter(|&&l| l > 0).count() as f64;
    let ratio = area / gt;
    assert!(
        (ratio - 1.0).abs() <= 0.2,
        "prior-weighted nucleus area off by {:.1}%",
        (ratio - 1.0) * 100.0
    );

    let plain_cfg = PipelineConfig {
        nucleus_prior: 0.5,
        ..PipelineConfig::default()
    };
    let (plain_labels, _) = segment_nuclei(&img, &clump, &plain_cfg).unwrap();
    let plain_area = plain_labels.data.iter().filter(|&&l| l > 0).count() as f64;
    let plain_ratio = plain_area / gt;
    assert!(
        plain_ratio > 2.0,
        "fixture no longer separates the methods: plain ratio {plain_ratio:.2}"
    );
    println!(
        "criterion 3: PASS (prior area ratio {:.2}, plain ratio {:.2})",
        ratio, plain_ratio
    );
}

fn random_gray(rng: &mut SplitMix64, w: usize, h: usize, levels: u64) -> GrayImage {
    let data = (0..w * h).map(|_| (rng.next_u64() % levels) as u8).collect();
    GrayImage::from_data(w, h, data)
}

fn random_mask(rng: &mut SplitMix64, w: usize, h: usize) -> Mask {
    Mask {
        width: w,
        height: h,
        data: (0..w * h).map(|_| rng.next_u64().is_multiple_of(2)).collect(),
    }
}

/// Per-plateau check of the definition: flood each maximal constant-value
/// component (8-connectivity) and demand every outside neighbor be brighter.
fn regional_minima_oracle(img: &GrayImage) -> Mask {
    let (w, h) = (img.width, img.height);
    let mut out = Mask::new(w, h);
    let mut seen = vec![false; w * h];
    for start in 0..w * h {
        if seen[start] {
            continue;
        }
        let v = img.data[start];
        let mut plateau = vec![start];
        let mut stack = vec![start];
        seen[start] = true;
        let mut is_min = true;
        while let Some(i) = stack.pop() {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if img.data[j] == v {
                        if !seen[j] {
                            seen[j] = true;
                            plateau.push(j);
                            stack.push(j);
                        }
                    } else if img.data[j] < v {
                        is_min = false;
                    }
                }
            }
        }
        if is_min {
            for i in plateau {
                out.data[i] = true;
            }
        }
    }
    out
}

/// Depth-first labeling in first-encounter raster order.
fn components_oracle(mask: &Mask, conn8: bool) -> Vec<u32> {
    let (w, h) = (mask.width, mask.height);
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    for start in 0..w * h {
        if !mask.data[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    if dx == 0 && dy == 0 || (!conn8 && dx != 0 && dy != 0) {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask.data[j] && labels[j] == 0 {
                        labels[j] = next;
                        stack.push(j);
                    }
                }
            }
        }
    }
    labels
}

/// Background flood from the border over 4-neighbors; anything background
/// the flood cannot reach is a hole.
fn fill_holes_oracle(mask: &Mask) -> Mask {
    let (w, h) = (mask.width, mask.height);
    let mut reach = vec![false; w * h];
    let mut stack = Vec::new();
    for (i, r) in reach.iter_mut().enumerate() {
        let (x, y) = (i % w, i / w);
        let border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
        if border && !mask.data[i] {
            *r = true;
            stack.push(i);
        }
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for (dx, dy) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                continue;
            }
            let j = ny as usize * w + nx as usize;
            if !mask.data[j] && !reach[j] {
                reach[j] = true;
                stack.push(j);
            }
        }
    }
    Mask {
        width: w,
        height: h,
        data: (0..w * h).map(|i| mask.data[i] || !reach[i]).collect(),
    }
}

#[test]
fn criterion_04_morphology_matches_brute_force_oracles() {
    let mut rng = SplitMix64::new(0x04acce);
    for case in 0..50 {
        let cap = random_gray(&mut rng, 16, 16, 8);
        let raw = random_gray(&mut rng, 16, 16, 8);
        let marker = GrayImage::from_data(
            16,
            16,
            raw.data.iter().zip(&cap.data).map(|(&a, &b)| a.min(b)).collect(),
        );
        let rec = reconstruct_dilation(&marker, &cap).unwrap();
        let naive = reconstruct_dilation_naive(&marker, &cap).unwrap();
        assert_eq!(rec.data, naive.data, "reconstruction, case {case}");
        for i in 0..16 * 16 {
            assert!(
                marker.data[i] <= rec.data[i] && rec.data[i] <= cap.data[i],
                "ordering violated at {i}, case {case}"
            );
        }

        let gray = random_gray(&mut rng, 16, 16, 6);
        assert_eq!(
            regional_minima(&gray).data,
            regional_minima_oracle(&gray).data,
            "regional minima, case {case}"
        );

        let m = random_mask(&mut rng, 16, 16);
        for conn in [4u8, 8] {
            let lib = connected_components(&m, conn).unwrap();
            assert_eq!(lib.data, components_oracle(&m, conn == 8), "components {conn}, case {case}");
        }
        assert_eq!(
            fill_holes(&m).data,
            fill_holes_oracle(&m).data,
            "hole filling, case {case}"
        );
    }
    println!("criterion 4: PASS (50 random 16x16 cases)");
}

fn disc_mask(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> Mask {
    let mut m = Mask::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            m.set(x, y, dx * dx + dy * dy <= r * r);
        }
    }
    m
}

/// Symmetric Hausdorff distance between two pixel sets. Shared pixels are at
/// distance zero both ways, so only the symmetric difference is scanned.
fn hausdorff(a: &Mask, b: &Mask) -> f64 {
    let pts = |m: &Mask| -> Vec<(f64, f64)> {
        m.data
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v)
            .map(|(i, _)| ((i % m.width) as f64, (i / m.width) as f64))
            .collect()
    };
    let pa = pts(a);
    let pb = pts(b);
    assert!(!pa.is_empty() && !pb.is_empty());
    let directed = |m: &Mask, other: &Mask, target: &[(f64, f64)]| -> f64 {
        m.data
            .iter()
            .zip(&other.data)
            .enumerate()
            .filter(|&(_, (&own, &oth))| own && !oth)
            .map(|(i, _)| {
                let (x, y) = ((i % m.width) as f64, (i / m.width) as f64);
                target
                    .iter()
                    .map(|&(u, v)| ((x - u) * (x - u) + (y - v) * (y - v)).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    directed(a, b, &pb).max(directed(b, a, &pa))
}

fn band_gradient_deviation(phi: &LevelSetField) -> f64 {
    let (w, h) = (phi.width, phi.height);
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in 0..h {
        for x in 0..w {
            if phi.phi[y * w + x].abs() >= 5.0 {
                continue;
            }
            let x0 = x.saturating_sub(1);
            let x1 = (x + 1).min(w - 1);
            let y0 = y.saturating_sub(1);
            let y1 = (y + 1).min(h - 1);
            let gx = (phi.phi[y * w + x1] - phi.phi[y * w + x0]) / 2.0;
            let gy = (phi.phi[y1 * w + x] - phi.phi[y0 * w + x]) / 2.0;
            sum += ((gx * gx + gy * gy).sqrt() - 1.0).abs();
            count += 1;
        }
    }
    sum / count.max(1) as f64
}

#[test]
fn criterion_05_contour_locks_onto_disc_edge() {
    let mut img = GrayImage::new(128, 128, 200);
    let truth = disc_mask(128, 128, 64.0, 64.0, 60.0);
    for i in 0..128 * 128 {
        if truth.data[i] {
            img.data[i] = 60;
        }
    }
    let seed = disc_mask(128, 128, 64.0, 64.0, 10.0);
    let params = DrlseParams::default();
    let g = edge_indicator(&img, params.sigma).unwrap();
    let phi0 = init_phi(128, 128, &seed, params.c0).unwrap();
    let start = Instant::now();
    let (phi, iters, converged) = drlse_run(&phi0, &g, &params, None).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let got = zero_sublevel_mask(&phi);
    let dc = dice(&got, &truth).unwrap();
    let hd = hausdorff(&got, &truth);
    assert!(converged, "no convergence within {iters} steps");
    assert!(iters <= 600, "took {iters} steps");
    assert!(dc >= 0.97, "dice {dc:.4}");
    assert!(hd <= 2.0, "hausdorff {hd:.2} px");
    assert!(secs < 10.0, "took {secs:.1} s");
    let band = band_gradient_deviation(&phi);
    if band <= 0.2 {
        println!("criterion 5: PASS (dice {dc:.4}, hausdorff {hd:.2}, {iters} steps)");
    } else {
        println!(
            "criterion 5: FAIL (dice {dc:.4}, hausdorff {hd:.2}, {iters} steps all pass, \
             but band regularity {band:.3} > 0.2: the binary-step far field rests at \
             +/-c0 = {}, so {{|phi| < 5}} covers the whole image and its flat regions, \
             where the gradient is 0 and the deviation is 1, dominate the mean)",
            params.c0
        );
    }
    assert!(band <= 0.2, "mean ||grad phi| - 1| over {{|phi| < 5}} = {band:.3}");
}

/// Second implementation of one evolution step, written as per-pixel stencil
/// closures with no shared intermediate arrays.
fn oracle_step(
    phi: &LevelSetField,
    g: &ScalarField,
    p: &DrlseParams,
    forbidden: Option<&Mask>,
) -> Vec<f64> {
    let (w, h) = (phi.width, phi.height);
    let at = |f: &[f64], x: isize, y: isize| -> f64 {
        let xi = x.clamp(0, w as isize - 1) as usize;
        let yi = y.clamp(0, h as isize - 1) as usize;
        f[yi * w + xi]
    };
    let ddx = move |f: &[f64], x: isize, y: isize| (at(f, x + 1, y) - at(f, x - 1, y)) / 2.0;
    let ddy = move |f: &[f64], x: isize, y: isize| (at(f, x, y + 1) - at(f, x, y - 1)) / 2.0;
    let dp = |s: f64| -> f64 {
        if s == 0.0 {
            1.0
        } else if s <= 1.0 {
            let a = 2.0 * std::f64::consts::PI * s;
            a.sin() / a
        } else {
            (s - 1.0) / s
        }
    };
    let delta = |x: f64| -> f64 {
        if x.abs() <= p.epsilon {
            (1.0 + (std::f64::consts::PI * x / p.epsilon).cos()) / (2.0 * p.epsilon)
        } else {
            0.0
        }
    };
    let f = &phi.phi;
    // pointwise field samples clamp the sample position itself, the way an
    // array of precomputed values is read back at a clamped index
    let clamp_pos = move |x: isize, y: isize| -> (isize, isize) {
        (x.clamp(0, w as isize - 1), y.clamp(0, h as isize - 1))
    };
    let speed = move |x: isize, y: isize| -> f64 {
        let (px, py) = (ddx(f, x, y), ddy(f, x, y));
        (px * px + py * py).sqrt()
    };
    let nx = move |x: isize, y: isize| {
        let (x, y) = clamp_pos(x, y);
        ddx(f, x, y) / (speed(x, y) + 1e-10)
    };
    let ny = move |x: isize, y: isize| {
        let (x, y) = clamp_pos(x, y);
        ddy(f, x, y) / (speed(x, y) + 1e-10)
    };
    let well_u = move |x: isize, y: isize| {
        let (x, y) = clamp_pos(x, y);
        (dp(speed(x, y)) - 1.0) * ddx(f, x, y)
    };
    let well_v = move |x: isize, y: isize| {
        let (x, y) = clamp_pos(x, y);
        (dp(speed(x, y)) - 1.0) * ddy(f, x, y)
    };
    let mut out = vec![0.0f64; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            let curv = (nx(x + 1, y) - nx(x - 1, y)) / 2.0 + (ny(x, y + 1) - ny(x, y - 1)) / 2.0;
            let reg_div = (well_u(x + 1, y) - well_u(x - 1, y)) / 2.0
                + (well_v(x, y + 1) - well_v(x, y - 1)) / 2.0;
            let lap = at(f, x - 1, y) + at(f, x + 1, y) + at(f, x, y - 1) + at(f, x, y + 1)
                - 4.0 * f[i];
            let de = delta(f[i]);
            let edge = de * (ddx(&g.data, x, y) * nx(x, y) + ddy(&g.data, x, y) * ny(x, y))
                + de * g.data[i] * curv;
            let area = p.balloon * g.data[i] * de;
            out[i] = f[i] + p.dt * (p.mu * (reg_div + lap) + p.lambda * edge + area);
        }
    }
    if let Some(fb) = forbidden {
        for (o, &b) in out.iter_mut().zip(&fb.data) {
            if b {
                *o = p.c0;
            }
        }
    }
    out
}

#[test]
fn criterion_06_evolution_step_matches_independent_stencil() {
    let mut img = GrayImage::new(16, 16, 200);
    for y in 0..16 {
        for x in 0..16 {
            let (dx, dy) = (x as f64 - 8.0, y as f64 - 8.0);
            if dx * dx + dy * dy <= 36.0 {
                img.set(x, y, 50);
            }
        }
    }
    let params = DrlseParams::default();
    let g = edge_indicator(&img, params.sigma).unwrap();
    let seed = disc_mask(16, 16, 8.0, 8.0, 3.0);
    let mut phi = init_phi(16, 16, &seed, params.c0).unwrap();
    // roughen the field first so every stencil branch sees real data
    for _ in 0..3 {
        phi = drlse_step(&phi, &g, &params, None).unwrap();
    }
    let lib = drlse_step(&phi, &g, &params, None).unwrap();
    let oracle = oracle_step(&phi, &g, &params, None);
    let worst = lib
        .phi
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    assert!(worst <= 1e-9, "free evolution deviates by {worst:e}");

    let mut forbidden = Mask::new(16, 16);
    for y in 0..16 {
        for x in 11..16 {
            forbidden.set(x, y, true);
        }
    }
    let lib_fb = drlse_step(&phi, &g, &params, Some(&forbidden)).unwrap();
    let oracle_fb = oracle_step(&phi, &g, &params, Some(&forbidden));
    let worst_fb = lib_fb
        .phi
        .iter()
        .zip(&oracle_fb)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    assert!(worst_fb <= 1e-9, "confined evolution deviates by {worst_fb:e}");

    let unstable = DrlseParams {
        mu: 0.05,
        dt: 5.0,
        ..DrlseParams::default()
    };
    assert!(matches!(
        drlse_step(&phi, &g, &unstable, None),
        Err(Error::UnstableTimeStep(v)) if (v - 0.25).abs() < 1e-12
    ));
    println!("criterion 6: PASS (max deviation {worst:e})");
}

#[test]
fn criterion_07_phantom_end_to_end() {
    let start = Instant::now();
    let spec = PhantomSpec::default();
    let (img, gt_cells, _) = generate_phantom(&spec).unwrap();
    let result = run_pipeline(std::slice::from_ref(&img), &PipelineConfig::default()).unwrap();
    assert_eq!(result.cells.len(), 3, "cell count {}", result.cells.len());
    let report = evaluate(&result.cells, &gt_cells).unwrap();
    let secs = start.elapsed().as_secs_f64();
    assert!(report.dc_mean >= 0.8, "dc_mean {:.4}", report.dc_mean);
    assert_eq!(report.fno, 0.0, "fno {}", report.fno);
    assert!(report.fpr <= 0.05, "fpr {:.4}", report.fpr);
    assert!(secs < 60.0, "took {secs:.1} s");
    println!(
        "criterion 7: PASS (dc_mean {:.3}, fpr {:.4}, {:.1} s)",
        report.dc_mean, report.fpr, secs
    );
}

fn rect(w: usize, h: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> Mask {
    let mut m = Mask::new(w, h);
    for y in y0..y1 {
        for x in x0..x1 {
            m.set(x, y, true);
        }
    }
    m
}

#[test]
fn criterion_08_metric_identities() {
    let a = rect(20, 10, 0, 0, 10, 10);
    let b = rect(20, 10, 5, 0, 15, 10);
    let c = rect(20, 10, 10, 0, 20, 10);
    assert_eq!(dice(&a, &a).unwrap(), 1.0);
    assert_eq!(dice(&a, &c).unwrap(), 0.0);
    assert_eq!(dice(&a, &b).unwrap(), 0.5);

    let matches = match_cells(&[a.clone(), c.clone()], &[a.clone(), c.clone()]).unwrap();
    assert!(matches.iter().all(|e| e.pred == Some(e.gt) && e.dc == 1.0));
    let unmatched = match_cells(&[], &[a.clone(), c.clone()]).unwrap();
    assert!(unmatched.iter().all(|e| e.pred.is_none() && e.dc == 0.0));

    assert_eq!(
        pixel_rates(std::slice::from_ref(&a), std::slice::from_ref(&a)).unwrap(),
        (1.0, 0.0)
    );
    assert_eq!(pixel_rates(&[], std::slice::from_ref(&a)).unwrap(), (0.0, 0.0));
    let p = rect(20, 10, 0, 0, 10, 10);
    let s = rect(20, 10, 2, 0, 12, 10);
    let (tpr, fpr) = pixel_rates(std::slice::from_ref(&s), std::slice::from_ref(&p)).unwrap();
    assert!((tpr - 0.8).abs() < 1e-12 && (fpr - 0.2).abs() < 1e-12);

    let entry = |gt: usize, dc: f64| MatchEntry {
        gt,
        pred: if dc > 0.0 { Some(gt) } else { None },
        dc,
    };
    let fno = object_fno(&[entry(0, 0.9), entry(1, 0.6), entry(2, 0.72)]).unwrap();
    assert!((fno - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(object_fno(&[entry(0, 1.0), entry(1, 1.0)]).unwrap(), 0.0);
    assert_eq!(object_fno(&[entry(0, 0.0), entry(1, 0.0)]).unwrap(), 1.0);

    let (_, gt_cells, _) = generate_phantom(&PhantomSpec::default()).unwrap();
    let report = evaluate(&gt_cells, &gt_cells).unwrap();
    assert_eq!(report.dc_mean, 1.0);
    assert_eq!(report.tpr, 1.0);
    assert_eq!(report.fpr, 0.0);
    assert_eq!(report.fno, 0.0);
    println!("criterion 8: PASS");
}

fn dir_snapshot(root: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/");
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn criterion_09_cli_runs_are_byte_identical() {
    let bin = env!("CARGO_BIN_EXE_cytoseg");
    let root = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        let status = std::process::Command::new(bin)
            .args(args)
            .status()
            .expect("binary failed to launch");
        assert!(status.success(), "cytoseg {args:?} exited with {status}");
    };

    let pa = root.path().join("phantom_a");
    let pb = root.path().join("phantom_b");
    for out in [&pa, &pb] {
        run(&["phantom", "--seed", "42", "--cells", "3", "--out", out.to_str().unwrap()]);
    }
    assert_eq!(dir_snapshot(&pa), dir_snapshot(&pb), "phantom runs differ");

    let image = pa.join("image.png");
    let sa = root.path().join("seg_a");
    let sb = root.path().join("seg_b");
    for out in [&sa, &sb] {
        run(&[
            "segment",
            "--input",
            image.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--overlay",
        ]);
    }
    assert_eq!(dir_snapshot(&sa), dir_snapshot(&sb), "segment runs differ");
    println!("criterion 9: PASS");
}

/// Optional benchmark against a locally provided dataset; informational
/// only, never fails the build. Point CYTOSEG_EVAL_DIR at a directory of
/// case subdirectories, each holding image.png and gt/cells/cell_0001.png...
#[test]
fn criterion_10_dataset_benchmark_when_available() {
    let Ok(dir) = std::env::var("CYTOSEG_EVAL_DIR") else {
        println!("criterion 10: SKIP (set CYTOSEG_EVAL_DIR to run the dataset benchmark)");
        return;
    };
    let mut cases: Vec<std::path::PathBuf> = std::fs::read_dir(&dir)
        .expect("CYTOSEG_EVAL_DIR unreadable")
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    cases.sort();
    assert!(!cases.is_empty(), "no case directories under {dir}");
    let mut means = Vec::new();
    for case in &cases {
        let img = cytoseg::io::load_grayscale(&case.join("image.png")).unwrap();
        let mut gt = Vec::new();
        for k in 1.. {
            let path = case.join("gt").join("cells").join(format!("cell_{k:04}.png"));
            if !path.exists() {
                break;
            }
            gt.push(cytoseg::io::load_mask(&path).unwrap());
        }
        assert!(!gt.is_empty(), "no ground-truth cells in {}", case.display());
        let result =
            run_pipeline(std::slice::from_ref(&img), &PipelineConfig::default()).unwrap();
        let report = evaluate(&result.cells, &gt).unwrap();
        means.push(report.dc_mean);
    }
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    if (mean - 0.852).abs() <= 0.05 {
        println!("criterion 10: PASS (dc_mean {mean:.3} over {} cases)", means.len());
    } else {
        println!(
            "criterion 10: INFO (dc_mean {mean:.3} over {} cases outside 0.852 +/- 0.05; \
             informational only)",
            means.len()
        );
    }
}
