//! Principal-component projections for real-vs-synthetic comparison plots.

use std::path::Path;

use flowsynth_tensor::Mat;
use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::schema_codec::EncodedDataset;

/// Eigenvalues below this fraction of the largest are treated as zero.
const DEGENERATE_RATIO: f64 = 1e-12;

/// A basis fitted on the reference set after per-feature standardization.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaBasis {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// `F × k`, unit columns, descending eigenvalue order.
    pub components: Mat,
    pub eigenvalues: Vec<f64>,
    /// Third component, used for the colour scalar; zero when `F < 3`.
    pub color_axis: Vec<f64>,
    color_mean: f64,
    color_std: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub tag: String,
    /// `n × k` coordinates.
    pub coords: Mat,
    /// Third-component score, standardized with the reference set's
    /// mean and deviation.
    pub color: Vec<f64>,
}

impl PcaBasis {
    pub fn fit(reference: &Mat, n_components: usize) -> Result<PcaBasis> {
        let (n, f) = reference.shape();
        if n < 2 || f < 2 {
            return Err(Error::Data("PCA needs at least two rows and two features".into()));
        }
        if n_components == 0 || n_components > f {
            return Err(Error::Config(format!("cannot take {n_components} components of {f} features")));
        }
        let mut mean = vec![0.0; f];
        for r in 0..n {
            for (m, v) in mean.iter_mut().zip(reference.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut scale = vec![0.0; f];
        for r in 0..n {
            for c in 0..f {
                scale[c] += (reference.get(r, c) - mean[c]).powi(2);
            }
        }
        for s in &mut scale {
            let sd = (*s / (n - 1) as f64).sqrt();
            *s = if sd > 0.0 { sd } else { 1.0 };
        }
        let z = DMatrix::from_fn(n, f, |r, c| (reference.get(r, c) - mean[c]) / scale[c]);
        let cov = (z.transpose() * &z) / (n - 1) as f64;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..f).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let top = eig.eigenvalues[order[0]].max(0.0);
        let column = |j: usize| -> Vec<f64> {
            let mut v: Vec<f64> = (0..f).map(|r| eig.eigenvectors[(r, j)]).collect();
            // sign: largest-magnitude entry positive
            let pivot = (0..f).fold(0, |b, i| if v[i].abs() > v[b].abs() { i } else { b });
            if v[pivot] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        };
        let mut components = Mat::zeros(f, n_components);
        let mut eigenvalues = Vec::with_capacity(n_components);
        let mut degenerate = false;
        for k in 0..n_components {
            let lambda = eig.eigenvalues[order[k]].max(0.0);
            if k > 0 && lambda <= DEGENERATE_RATIO * top {
                log::warn!("degenerate covariance: component {} has no variance, left at zero", k + 1);
                degenerate = true;
                eigenvalues.push(0.0);
                continue;
            }
            for (r, v) in column(order[k]).into_iter().enumerate() {
                components.set(r, k, v);
            }
            eigenvalues.push(lambda);
        }
        let color_axis = if f >= 3 && eig.eigenvalues[order[2]] > DEGENERATE_RATIO * top {
            column(order[2])
        } else {
            vec![0.0; f]
        };
        let mut basis = PcaBasis {
            mean,
            scale,
            components,
            eigenvalues,
            color_axis,
            color_mean: 0.0,
            color_std: 1.0,
            degenerate,
        };
        let raw = basis.raw_color(reference);
        let cm = raw.iter().sum::<f64>() / n as f64;
        let cs = (raw.iter().map(|v| (v - cm).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        basis.color_mean = cm;
        basis.color_std = if cs > 0.0 { cs } else { 1.0 };
        Ok(basis)
    }

    fn standardized(&self, x: &Mat, r: usize) -> impl Iterator<Item = f64> + '_ {
        let row = x.row(r).to_vec();
        (0..self.mean.len()).map(move |c| (row[c] - self.mean[c]) / self.scale[c])
    }

    fn raw_color(&self, x: &Mat) -> Vec<f64> {
        (0..x.rows())
            .map(|r| self.standardized(x, r).zip(&self.color_axis).map(|(z, w)| z * w).sum())
            .collect()
    }

    pub fn project(&self, tag: &str, x: &Mat) -> Result<Projection> {
        let f = self.mean.len();
        if x.cols() != f {
            return Err(Error::Shape(format!("PCA basis has {f} features, data has {}", x.cols())));
        }
        let k = self.components.cols();
        let mut coords = Mat::zeros(x.rows(), k);
        for r in 0..x.rows() {
            let z: Vec<f64> = self.standardized(x, r).collect();
            for j in 0..k {
                coords.set(r, j, (0..f).map(|c| z[c] * self.components.get(c, j)).sum());
            }
        }
        let color = self
            .raw_color(x)
            .into_iter()
            .map(|v| (v - self.color_mean) / self.color_std)
            .collect();
        Ok(Projection {
            tag: tag.to_string(),
            coords,
            color,
        })
    }
}

/// Fits the basis on `reference` and projects it (tagged `reference_tag`)
/// and every other listed set onto it.
pub fn pca_project(
    reference_tag: &str,
    reference: &EncodedDataset,
    others: &[(&str, &EncodedDataset)],
    n_components: usize,
) -> Result<(PcaBasis, Vec<Projection>)> {
    let basis = PcaBasis::fit(&reference.features, n_components)?;
    let mut out = vec![basis.project(reference_tag, &reference.features)?];
    for (tag, ds) in others {
        if ds.feature_names != reference.feature_names {
            return Err(Error::Schema(format!("{tag:?} does not share the reference feature list")));
        }
        out.push(basis.project(tag, &ds.features)?);
    }
    Ok((basis, out))
}

/// `dataset_tag,pc1,pc2,...,color` rows.
pub fn write_projection_csv(path: &Path, projections: &[Projection]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    let k = projections.first().map_or(2, |p| p.coords.cols());
    let mut header = vec!["dataset_tag".to_string()];
    header.extend((1..=k).map(|i| format!("pc{i}")));
    header.push("color".into());
    w.write_record(&header).map_err(|e| Error::Io(e.into()))?;
    for p in projections {
        for r in 0..p.coords.rows() {
            let mut rec = vec![p.tag.clone()];
            rec.extend(p.coords.row(r).iter().map(|v| format!("{v:.9}")));
            rec.push(format!("{:.9}", p.color[r]));
            w.write_record(&rec).map_err(|e| Error::Io(e.into()))?;
        }
    }
    w.flush()?;
    Ok(())
}
