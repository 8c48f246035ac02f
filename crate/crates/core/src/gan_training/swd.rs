use flowsynth_tensor::Mat;
use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Mean 1-D Wasserstein-1 distance over `n_projections` random unit
/// directions. The larger set is uniformly subsampled to the smaller size so
/// each 1-D distance is an exact sorted-sample comparison.
pub fn sliced_wasserstein(a: &Mat, b: &Mat, n_projections: usize, seed: u64) -> Result<f64> {
    sliced_wasserstein_with(a, b, n_projections, &mut rng::substream(seed, rng::MONITOR))
}

pub fn sliced_wasserstein_with(a: &Mat, b: &Mat, n_projections: usize, rng: &mut Rng) -> Result<f64> {
    if a.rows() == 0 || b.rows() == 0 {
        return Err(Error::Data("SWD needs nonempty sample sets".into()));
    }
    if a.cols() != b.cols() {
        return Err(Error::Shape("SWD operands differ in feature width".into()));
    }
    if n_projections == 0 {
        return Err(Error::Config("SWD needs at least one projection".into()));
    }
    let n = a.rows().min(b.rows());
    let pick = |m: &Mat, rng: &mut Rng| -> Vec<usize> {
        if m.rows() == n {
            (0..n).collect()
        } else {
            let mut idx = index::sample(rng, m.rows(), n).into_vec();
            idx.sort_unstable();
            idx
        }
    };
    let ia = pick(a, rng);
    let ib = pick(b, rng);
    let d = a.cols();
    let mut pa = vec![0.0; n];
    let mut pb = vec![0.0; n];
    let mut total = 0.0;
    for _ in 0..n_projections {
        let dir = loop {
            let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|x| x / norm).collect::<Vec<_>>();
            }
        };
        let proj = |m: &Mat, r: usize| m.row(r).iter().zip(&dir).map(|(x, w)| x * w).sum::<f64>();
        for (k, (&ra, &rb)) in ia.iter().zip(&ib).enumerate() {
            pa[k] = proj(a, ra);
            pb[k] = proj(b, rb);
        }
        pa.sort_by(f64::total_cmp);
        pb.sort_by(f64::total_cmp);
        total += pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64;
    }
    Ok(total / n_projections as f64)
}
