//! Classical PCA baseline.

use log::warn;
use nalgebra::SVD;

use crate::error::{Error, Result};
use crate::linalg::{fix_sign, orthonormal_completion};
use crate::matrix::Matrix;
use crate::par::Execution;
use crate::spca::{center, project, CenteredData};

const RANK_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mu: Vec<f64>,
    /// `p × d`, orthonormal columns in order of decreasing explained variance.
    pub components: Matrix,
    /// Per-column variance; zero for padded columns. Empty for models read from disk.
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn new(mu: Vec<f64>, components: Matrix) -> Result<Self> {
        if mu.len() != components.rows() {
            return Err(Error::ShapeMismatch(format!(
                "mean has {} entries but components have {} rows",
                mu.len(),
                components.rows()
            )));
        }
        Ok(Self {
            mu,
            components,
            explained_variance: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.components.cols()
    }

    pub fn truncate(&self, dim: usize) -> Result<PcaModel> {
        if dim == 0 || dim > self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "cannot truncate {} components to {dim}",
                self.dim()
            )));
        }
        Ok(PcaModel {
            mu: self.mu.clone(),
            components: self.components.leading_columns(dim),
            explained_variance: self.explained_variance.iter().take(dim).copied().collect(),
        })
    }

    pub fn transform(&self, d_new: &Matrix, exec: Execution) -> Result<Matrix> {
        project(&self.mu, &self.components, d_new, exec)
    }
}

/// Top `dims` principal directions from the SVD of the centered data.
/// Columns beyond the numerical rank are an orthonormal completion over the
/// standard basis. Each column's largest-magnitude entry is positive.
pub fn pca_fit(d: &Matrix, dims: usize) -> Result<PcaModel> {
    let (n, p) = d.shape();
    if dims == 0 || dims > p {
        return Err(Error::ShapeMismatch(format!(
            "dims must be in 1..={p}, got {dims}"
        )));
    }
    let bound = n.saturating_sub(1).min(p);
    if dims > bound {
        warn!("dims = {dims} exceeds the rank bound min(n-1, p) = {bound}; padding with null-space directions");
    }
    let CenteredData { dtilde, mu } = center(d);
    let svd = SVD::new(dtilde.to_nalgebra(), false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let top = order.first().map_or(0.0, |&i| svd.singular_values[i]);
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let mut columns = Vec::with_capacity(dims);
    let mut variance = Vec::with_capacity(dims);
    for &i in &order {
        let s = svd.singular_values[i];
        if columns.len() == dims || s * s <= RANK_REL_TOL * top * top || s == 0.0 {
            break;
        }
        let mut v: Vec<f64> = v_t.row(i).iter().copied().collect();
        fix_sign(&mut v);
        columns.push(v);
        variance.push(s * s / denom);
    }
    if columns.len() < dims {
        let extra = orthonormal_completion(&columns, p, dims - columns.len());
        variance.extend(std::iter::repeat_n(0.0, extra.len()));
        columns.extend(extra);
    }
    Ok(PcaModel {
        mu,
        components: Matrix::from_columns(&columns)?,
        explained_variance: variance,
    })
}

pub fn pca_transform(model: &PcaModel, d_new: &Matrix) -> Result<Matrix> {
    model.transform(d_new, Execution::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::dot;

    #[test]
    fn line_through_origin() {
        let d = Matrix::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 2.0],
            vec![2.0, 4.0],
            vec![-1.0, -2.0],
        ])
        .unwrap();
        let m = pca_fit(&d, 1).unwrap();
        let s = 5f64.sqrt();
        assert!((m.components[(0, 0)] - 1.0 / s).abs() < 1e-12);
        assert!((m.components[(1, 0)] - 2.0 / s).abs() < 1e-12);
    }

    #[test]
    fn mean_row_projects_to_zero() {
        let d = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![2.0, 0.0, 1.0], vec![0.0, 1.0, 5.0]])
            .unwrap();
        let m = pca_fit(&d, 2).unwrap();
        let mu = Matrix::new(1, 3, m.mu.clone()).unwrap();
        let out = pca_transform(&m, &mu).unwrap();
        assert!(out.as_slice().iter().all(|v| v.abs() < 1e-12));
        assert!(pca_transform(&m, &Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn pads_beyond_rank() {
        let d = Matrix::from_rows(&[vec![1.0, 0.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0, 0.0]]).unwrap();
        let m = pca_fit(&d, 3).unwrap();
        assert_eq!(m.explained_variance[1..], [0.0, 0.0]);
        for a in 0..3 {
            for b in 0..3 {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot(&m.components.col(a), &m.components.col(b)) - expect).abs() < 1e-12);
            }
        }
        assert!(pca_fit(&d, 5).is_err());
    }
}
