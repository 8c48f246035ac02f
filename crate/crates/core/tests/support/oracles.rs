//! Independent reference computations for the rank metrics.

pub fn brute_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

/// Dense threshold sweep, then interpolation on the sorted vertex list.
pub fn brute_tpr_at(scores: &[f64], labels: &[bool], target: f64) -> f64 {
    let p = labels.iter().filter(|&&l| l).count() as f64;
    let n = labels.len() as f64 - p;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.push(f64::INFINITY);
    let mut pts: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&t| {
            let tp = scores.iter().zip(labels).filter(|(s, l)| **l && **s >= t).count() as f64;
            let fp = scores.iter().zip(labels).filter(|(s, l)| !**l && **s >= t).count() as f64;
            (fp / n, tp / p)
        })
        .collect();
    pts.push((0.0, 0.0));
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if let Some(best) = pts.iter().filter(|q| q.0 == target).map(|q| q.1).reduce(f64::max) {
        return best;
    }
    let lo = pts.iter().filter(|q| q.0 < target).last().unwrap();
    let hi = pts.iter().find(|q| q.0 > target).unwrap();
    lo.1 + (target - lo.0) / (hi.0 - lo.0) * (hi.1 - lo.1)
}
