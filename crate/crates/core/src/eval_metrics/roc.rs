use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ROC vertices from a descending threshold sweep. `thresholds[0]` is `+∞`
/// (the `(0, 0)` anchor); each later vertex follows one group of tied scores,
/// so the last vertex is `(1, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
}

/// Curve and area for binary `labels` (`true` = positive). The area is the
/// Mann–Whitney statistic with ties counted one half, accumulated in
/// integers so it is exact up to the final division.
pub fn roc_auroc(scores: &[f64], labels: &[bool]) -> Result<(RocCurve, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape("score and label counts differ".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("NaN score".into()));
    }
    let p = labels.iter().filter(|&&l| l).count() as u64;
    let n = labels.len() as u64 - p;
    if p == 0 || n == 0 {
        return Err(Error::Data("ROC needs both positive and negative rows".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut curve = RocCurve {
        thresholds: vec![f64::INFINITY],
        fpr: vec![0.0],
        tpr: vec![0.0],
    };
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the pair count credited to positives
    let mut twice_area: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut gp, mut gn) = (0u64, 0u64);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                gp += 1;
            } else {
                gn += 1;
            }
            i += 1;
        }
        twice_area += gn as u128 * (2 * tp as u128 + gp as u128);
        tp += gp;
        fp += gn;
        curve.thresholds.push(s);
        curve.fpr.push(fp as f64 / n as f64);
        curve.tpr.push(tp as f64 / p as f64);
    }
    let auroc = twice_area as f64 / (2 * p as u128 * n as u128) as f64;
    Ok((curve, auroc))
}

/// TPR at `target_fpr` by linear interpolation between the bracketing
/// vertices. Where the curve is vertical at the target the highest TPR on
/// that segment is returned.
pub fn tpr_at_fpr(curve: &RocCurve, target_fpr: f64) -> f64 {
    let t = target_fpr.clamp(0.0, 1.0);
    let n = curve.fpr.len();
    let mut i = 0;
    while i < n && curve.fpr[i] <= t {
        if curve.fpr[i] == t {
            // last vertex with this FPR carries the highest TPR
            let mut j = i;
            while j + 1 < n && curve.fpr[j + 1] == t {
                j += 1;
            }
            return curve.tpr[j];
        }
        i += 1;
    }
    if i == 0 {
        return curve.tpr[0];
    }
    if i == n {
        return curve.tpr[n - 1];
    }
    let (x0, x1) = (curve.fpr[i - 1], curve.fpr[i]);
    let (y0, y1) = (curve.tpr[i - 1], curve.tpr[i]);
    y0 + (t - x0) / (x1 - x0) * (y1 - y0)
}
