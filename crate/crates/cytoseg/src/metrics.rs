//! Segmentation evaluation: per-cell Dice with greedy matching, pixel-level
//! true/false positive rates, and the fraction of badly segmented objects.

use crate::error::{Error, Result};
use crate::raster::Mask;

pub const GOOD_DICE_THRESHOLD: f64 = 0.7;

/// One ground-truth cell's match: the paired prediction (if any) and the Dice
/// coefficient of the pair (0 when unmatched).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchEntry {
    pub gt: usize,
    pub pred: Option<usize>,
    pub dc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_cell_dc: Vec<MatchEntry>,
    pub dc_mean: f64,
    pub dc_std: f64,
    pub tpr: f64,
    pub tpr_prose: f64,
    pub fpr: f64,
    pub fno: f64,
    pub good_threshold: f64,
}

/// 2|X∩Y| / (|X|+|Y|); two empty masks agree vacuously with value 1.
pub fn dice(x: &Mask, y: &Mask) -> Result<f64> {
    if !x.same_dims(y) {
        return Err(Error::DimensionMismatch(x.width, x.height, y.width, y.height));
    }
    let inter = x
        .data
        .iter()
        .zip(&y.data)
        .filter(|(&a, &b)| a && b)
        .count();
    let total = x.count() + y.count();
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

/// Greedy one-to-one matching by descending Dice over pairs with dc > 0;
/// ties break on the smaller ground-truth index, then the smaller prediction
/// index. Unmatched ground-truth cells get dc = 0. Entries come back in
/// ground-truth order.
pub fn match_cells(pred: &[Mask], gt: &[Mask]) -> Result<Vec<MatchEntry>> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (gi, g) in gt.iter().enumerate() {
        for (pi, p) in pred.iter().enumerate() {
            let dc = dice(p, g)?;
            if dc > 0.0 {
                pairs.push((dc, gi, pi));
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut gt_taken = vec![false; gt.len()];
    let mut pred_taken = vec![false; pred.len()];
    let mut entries: Vec<MatchEntry> = (0..gt.len())
        .map(|gi| MatchEntry {
            gt: gi,
            pred: None,
            dc: 0.0,
        })
        .collect();
    for (dc, gi, pi) in pairs {
        if !gt_taken[gi] && !pred_taken[pi] {
            gt_taken[gi] = true;
            pred_taken[pi] = true;
            entries[gi] = MatchEntry {
                gt: gi,
                pred: Some(pi),
                dc,
            };
        }
    }
    Ok(entries)
}

fn union_of(masks: &[Mask]) -> Option<Mask> {
    let first = masks.first()?;
    let mut u = Mask::new(first.width, first.height);
    for m in masks {
        u.union_with(m);
    }
    Some(u)
}

/// P = union of ground truth, S = union of predictions.
/// tpr = |S∩P| / |P| (sensitivity), fpr = |S∖P| / |S|.
/// An empty prediction union yields (0, 0).
pub fn pixel_rates(pred: &[Mask], gt: &[Mask]) -> Result<(f64, f64)> {
    let p = union_of(gt)
        .filter(Mask::any)
        .ok_or_else(|| Error::InvalidParam("ground-truth union is empty".into()))?;
    let s = match union_of(pred) {
        Some(s) if s.any() => s,
        _ => return Ok((0.0, 0.0)),
    };
    if !s.same_dims(&p) {
        return Err(Error::DimensionMismatch(s.width, s.height, p.width, p.height));
    }
    let mut inter = 0usize;
    let mut s_only = 0usize;
    for (a, b) in s.data.iter().zip(&p.data) {
        match (a, b) {
            (true, true) => inter += 1,
            (true, false) => s_only += 1,
            _ => {}
        }
    }
    let tpr = inter as f64 / p.count() as f64;
    let fpr = s_only as f64 / s.count() as f64;
    Ok((tpr, fpr))
}

/// Fraction of ground-truth cells whose Dice is at or below the good-segmentation
/// threshold of 0.7.
pub fn object_fno(matching: &[MatchEntry]) -> Result<f64> {
    if matching.is_empty() {
        return Err(Error::InvalidParam("no ground-truth cells to score".into()));
    }
    let bad = matching
        .iter()
        .filter(|e| e.dc <= GOOD_DICE_THRESHOLD)
        .count();
    Ok(bad as f64 / matching.len() as f64)
}

pub fn evaluate(pred: &[Mask], gt: &[Mask]) -> Result<EvalReport> {
    let per_cell_dc = match_cells(pred, gt)?;
    let fno = object_fno(&per_cell_dc)?;
    let n = per_cell_dc.len() as f64;
    let dc_mean = per_cell_dc.iter().map(|e| e.dc).sum::<f64>() / n;
    let dc_std = (per_cell_dc
        .iter()
        .map(|e| (e.dc - dc_mean) * (e.dc - dc_mean))
        .sum::<f64>()
        / n)
        .sqrt();
    let (tpr, fpr) = pixel_rates(pred, gt)?;
    let tpr_prose = match union_of(pred) {
        Some(s) if s.any() => {
            let p = union_of(gt).expect("gt nonempty checked above");
            let inter = s
                .data
                .iter()
                .zip(&p.data)
                .filter(|(&a, &b)| a && b)
                .count();
            inter as f64 / s.count() as f64
        }
        _ => 0.0,
    };
    Ok(EvalReport {
        per_cell_dc,
        dc_mean,
        dc_std,
        tpr,
        tpr_prose,
        fpr,
        fno,
        good_threshold: GOOD_DICE_THRESHOLD,
    })
}

impl EvalReport {
    /// key=value lines followed by a per-cell CSV block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("dc_mean={:.4}\n", self.dc_mean));
        out.push_str(&format!("dc_std={:.4}\n", self.dc_std));
        out.push_str(&format!("tpr={:.4}\n", self.tpr));
        out.push_str(&format!("tpr_prose={:.4}\n", self.tpr_prose));
        out.push_str(&format!("fpr={:.4}\n", self.fpr));
        out.push_str(&format!("fno={:.4}\n", self.fno));
        out.push_str("gt_index,pred_index,dc\n");
        for e in &self.per_cell_dc {
            let pred = e.pred.map(|p| p.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{:.4}\n", e.gt, pred, e.dc));
        }
        out
    }
}
