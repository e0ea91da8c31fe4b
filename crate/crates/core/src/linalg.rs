//! Thin wrappers over nalgebra factorizations plus a few shared helpers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::matrix::{axpy, dot, norm, Matrix};
use crate::par::Execution;

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
/// Eigenvectors are the columns of the returned matrix.
pub fn symmetric_eigen_desc(m: &Matrix) -> (Vec<f64>, Matrix) {
    let eig = SymmetricEigen::new(m.to_nalgebra());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let n = m.rows();
    let mut vecs = Matrix::zeros(n, order.len());
    for (k, &i) in order.iter().enumerate() {
        for r in 0..n {
            vecs[(r, k)] = eig.eigenvectors[(r, i)];
        }
    }
    (values, vecs)
}

/// Squared singular values of `m` (descending), from the smaller Gram matrix.
pub fn squared_singular_values(m: &Matrix, exec: Execution) -> Vec<f64> {
    let gram = if m.rows() <= m.cols() {
        m.gram_rows(exec)
    } else {
        m.gram_cols(exec)
    };
    let (values, _) = symmetric_eigen_desc(&gram);
    values.into_iter().map(|v| v.max(0.0)).collect()
}

pub fn largest_squared_singular_value(m: &Matrix, exec: Execution) -> f64 {
    if m.max_abs() == 0.0 {
        return 0.0;
    }
    squared_singular_values(m, exec)[0]
}

/// Orthonormal basis (as vectors) of the row space of `m`, keeping
/// directions whose squared singular value exceeds `rel_tol · σ_max²`.
pub fn row_space_basis(m: &Matrix, rel_tol: f64, exec: Execution) -> Vec<Vec<f64>> {
    if m.max_abs() == 0.0 {
        return Vec::new();
    }
    let (n, p) = m.shape();
    if p <= n {
        let (values, vecs) = symmetric_eigen_desc(&m.gram_cols(exec));
        let cutoff = values[0] * rel_tol;
        values
            .iter()
            .enumerate()
            .take_while(|(_, v)| **v > cutoff)
            .map(|(k, _)| vecs.col(k))
            .collect()
    } else {
        // right singular vectors v_k = D^T u_k / σ_k
        let (values, vecs) = symmetric_eigen_desc(&m.gram_rows(exec));
        let cutoff = values[0] * rel_tol;
        let mut basis = Vec::new();
        for (k, v) in values.iter().enumerate() {
            if *v <= cutoff {
                break;
            }
            let mut dir = m.tr_matvec(&vecs.col(k));
            let len = norm(&dir);
            dir.iter_mut().for_each(|x| *x /= len);
            basis.push(dir);
        }
        basis
    }
}

/// Extends `basis` (assumed orthonormal) with `count` further orthonormal
/// vectors, taken by Gram–Schmidt over e_0, e_1, ... in order. Returns only
/// the new vectors.
pub fn orthonormal_completion(basis: &[Vec<f64>], p: usize, count: usize) -> Vec<Vec<f64>> {
    let mut all: Vec<Vec<f64>> = basis.to_vec();
    let mut added = Vec::with_capacity(count);
    for j in 0..p {
        if added.len() == count {
            break;
        }
        let mut v = vec![0.0; p];
        v[j] = 1.0;
        // two passes keep the result orthogonal to working precision
        for _ in 0..2 {
            for b in &all {
                let c = dot(b, &v);
                axpy(-c, b, &mut v);
            }
        }
        let len = norm(&v);
        if len > 1e-6 {
            v.iter_mut().for_each(|x| *x /= len);
            fix_sign(&mut v);
            all.push(v.clone());
            added.push(v);
        }
    }
    assert_eq!(added.len(), count, "no room left for an orthonormal completion");
    added
}

/// Flips `v` so that its largest-magnitude entry (first on ties) is positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Cholesky factor of a symmetric positive-definite matrix.
pub struct SpdFactor(Cholesky<f64, Dyn>);

impl SpdFactor {
    pub fn new(m: DMatrix<f64>) -> Option<Self> {
        Cholesky::new(m).map(SpdFactor)
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(rhs);
        self.0.solve(&b).as_slice().to_vec()
    }

    pub fn solve_matrix(&self, rhs: &Matrix) -> Matrix {
        Matrix::from_nalgebra(&self.0.solve(&rhs.to_nalgebra()))
    }
}
