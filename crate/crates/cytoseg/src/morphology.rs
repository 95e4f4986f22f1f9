//! Grayscale reconstruction, maxima suppression, regional minima, connected
//! components, small-object removal, and hole filling.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::raster::{GrayImage, LabelMap, Mask};

const N8: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];
const N4: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];

/// Morphological reconstruction by dilation under 8-connectivity: the largest
/// image ≤ mask reachable by iterated geodesic dilation of marker. Raster and
/// anti-raster sweeps followed by queue propagation reach the exact fixpoint.
pub fn reconstruct_dilation(marker: &GrayImage, mask: &GrayImage) -> Result<GrayImage> {
    let (w, h) = (mask.width, mask.height);
    if marker.width != w || marker.height != h {
        return Err(Error::DimensionMismatch(marker.width, marker.height, w, h));
    }
    for y in 0..h {
        for x in 0..w {
            if marker.data[y * w + x] > mask.data[y * w + x] {
                return Err(Error::MarkerAboveMask(x, y));
            }
        }
    }
    let mut j = marker.data.clone();
    let m = &mask.data;

    // neighbors already visited in a top-left to bottom-right scan
    const PLUS: [(isize, isize); 4] = [(-1, -1), (0, -1), (1, -1), (-1, 0)];
    const MINUS: [(isize, isize); 4] = [(1, 0), (-1, 1), (0, 1), (1, 1)];

    for y in 0..h as isize {
        for x in 0..w as isize {
            let idx = y as usize * w + x as usize;
            let mut v = j[idx];
            for (dx, dy) in PLUS {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize {
                    v = v.max(j[ny as usize * w + nx as usize]);
                }
            }
            j[idx] = v.min(m[idx]);
        }
    }
    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
    for y in (0..h as isize).rev() {
        for x in (0..w as isize).rev() {
            let idx = y as usize * w + x as usize;
            let mut v = j[idx];
            for (dx, dy) in MINUS {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize {
                    v = v.max(j[ny as usize * w + nx as usize]);
                }
            }
            j[idx] = v.min(m[idx]);
            for (dx, dy) in MINUS {
                let (nx, ny) = (x + dx, y + dy);
                if nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize {
                    let nidx = ny as usize * w + nx as usize;
                    if j[nidx] < j[idx] && j[nidx] < m[nidx] {
                        queue.push_back((x as usize, y as usize));
                        break;
                    }
                }
            }
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        let v = j[y * w + x];
        for (dx, dy) in N8 {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            if nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize {
                let nidx = ny as usize * w + nx as usize;
                if j[nidx] < v && j[nidx] < m[nidx] {
                    j[nidx] = v.min(m[nidx]);
                    queue.push_back((nx as usize, ny as usize));
                }
            }
        }
    }
    Ok(GrayImage::from_data(w, h, j))
}

/// Levels every regional maximum whose prominence is at most h, via
/// reconstruction of (image - h) under image.
pub fn h_maxima_suppress(image: &GrayImage, h: u8) -> Result<GrayImage> {
    if h == 0 {
        return Err(Error::InvalidParam("suppression height must be >= 1".into()));
    }
    let marker = GrayImage::from_data(
        image.width,
        image.height,
        image.data.iter().map(|&v| v.saturating_sub(h)).collect(),
    );
    reconstruct_dilation(&marker, image)
}

/// Regional minima: 8-connected constant-intensity plateaus whose every
/// outside neighbor is strictly brighter. A constant image is one all-image
/// plateau with no outside neighbors, hence all foreground.
pub fn regional_minima(image: &GrayImage) -> Mask {
    let (w, h) = (image.width, image.height);
    let mut out = Mask::new(w, h);
    let mut visited = vec![false; w * h];
    let mut plateau: Vec<usize> = Vec::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    for start in 0..w * h {
        if visited[start] {
            continue;
        }
        let level = image.data[start];
        let mut is_min = true;
        plateau.clear();
        queue.push_back(start);
        visited[start] = true;
        while let Some(idx) = queue.pop_front() {
            plateau.push(idx);
            let (x, y) = ((idx % w) as isize, (idx / w) as isize);
            for (dx, dy) in N8 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let nidx = ny as usize * w + nx as usize;
                let nv = image.data[nidx];
                if nv == level {
                    if !visited[nidx] {
                        visited[nidx] = true;
                        queue.push_back(nidx);
                    }
                } else if nv < level {
                    is_min = false;
                }
            }
        }
        if is_min {
            for &idx in &plateau {
                out.data[idx] = true;
            }
        }
    }
    out
}

/// Labels foreground components 1..n in first-encounter raster order.
pub fn connected_components(mask: &Mask, connectivity: u8) -> Result<LabelMap> {
    let neighbors: &[(isize, isize)] = match connectivity {
        4 => &N4,
        8 => &N8,
        other => {
            return Err(Error::InvalidParam(format!(
                "connectivity must be 4 or 8, got {other}"
            )))
        }
    };
    let (w, h) = (mask.width, mask.height);
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut queue: VecDeque<usize> = VecDeque::new();
    for start in 0..w * h {
        if !mask.data[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            let (x, y) = ((idx % w) as isize, (idx / w) as isize);
            for &(dx, dy) in neighbors {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let nidx = ny as usize * w + nx as usize;
                if mask.data[nidx] && labels[nidx] == 0 {
                    labels[nidx] = next;
                    queue.push_back(nidx);
                }
            }
        }
    }
    Ok(LabelMap {
        width: w,
        height: h,
        n_labels: next,
        data: labels,
    })
}

/// Drops components with area strictly below min_area; survivors are
/// relabeled contiguously preserving label order.
pub fn remove_small_components(labels: &LabelMap, min_area: usize) -> LabelMap {
    let n = labels.n_labels as usize;
    let mut areas = vec![0usize; n + 1];
    for &v in &labels.data {
        areas[v as usize] += 1;
    }
    let mut remap = vec![0u32; n + 1];
    let mut next = 0u32;
    for old in 1..=n {
        if areas[old] >= min_area && areas[old] > 0 {
            next += 1;
            remap[old] = next;
        }
    }
    LabelMap {
        width: labels.width,
        height: labels.height,
        n_labels: next,
        data: labels.data.iter().map(|&v| remap[v as usize]).collect(),
    }
}

/// Fills background regions not 4-connected to the image border.
pub fn fill_holes(mask: &Mask) -> Mask {
    let (w, h) = (mask.width, mask.height);
    let mut reach = vec![false; w * h];
    let mut queue: VecDeque<usize> = VecDeque::new();
    let seed = |idx: usize, reach: &mut Vec<bool>, queue: &mut VecDeque<usize>| {
        if !mask.data[idx] && !reach[idx] {
            reach[idx] = true;
            queue.push_back(idx);
        }
    };
    for x in 0..w {
        seed(x, &mut reach, &mut queue);
        seed((h - 1) * w + x, &mut reach, &mut queue);
    }
    for y in 0..h {
        seed(y * w, &mut reach, &mut queue);
        seed(y * w + w - 1, &mut reach, &mut queue);
    }
    while let Some(idx) = queue.pop_front() {
        let (x, y) = ((idx % w) as isize, (idx / w) as isize);
        for (dx, dy) in N4 {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                continue;
            }
            let nidx = ny as usize * w + nx as usize;
            if !mask.data[nidx] && !reach[nidx] {
                reach[nidx] = true;
                queue.push_back(nidx);
            }
        }
    }
    Mask {
        width: w,
        height: h,
        data: reach.iter().map(|&r| !r).collect(),
    }
}

/// Foreground pixels with at least one 4-neighbor outside the mask
/// (border pixels count their off-image side as outside).
pub fn boundary(mask: &Mask) -> Mask {
    let (w, h) = (mask.width, mask.height);
    let mut out = Mask::new(w, h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let idx = y as usize * w + x as usize;
            if !mask.data[idx] {
                continue;
            }
            let mut edge = false;
            for (dx, dy) in N4 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0
                    || ny < 0
                    || nx >= w as isize
                    || ny >= h as isize
                    || !mask.data[ny as usize * w + nx as usize]
                {
                    edge = true;
                }
            }
            out.data[idx] = edge;
        }
    }
    out
}

/// Naive reconstruction oracle: dilate the marker one step at a time under
/// the mask until nothing changes.
pub fn reconstruct_dilation_naive(marker: &GrayImage, mask: &GrayImage) -> Result<GrayImage> {
    let (w, h) = (mask.width, mask.height);
    if marker.width != w || marker.height != h {
        return Err(Error::DimensionMismatch(marker.width, marker.height, w, h));
    }
    for y in 0..h {
        for x in 0..w {
            if marker.data[y * w + x] > mask.data[y * w + x] {
                return Err(Error::MarkerAboveMask(x, y));
            }
        }
    }
    let mut cur = marker.data.clone();
    loop {
        let mut nxt = cur.clone();
        for y in 0..h as isize {
            for x in 0..w as isize {
                let idx = y as usize * w + x as usize;
                let mut v = cur[idx];
                for (dx, dy) in N8 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize {
                        v = v.max(cur[ny as usize * w + nx as usize]);
                    }
                }
                nxt[idx] = v.min(mask.data[idx]);
            }
        }
        if nxt == cur {
            break;
        }
        cur = nxt;
    }
    Ok(GrayImage::from_data(w, h, cur))
}
