//! 1-nearest-neighbor and one-vs-all kernel ridge regression.

use serde::{Deserialize, Serialize};

use crate::error::{shape, Error, Result};
use crate::linalg::SpdFactor;
use crate::matrix::{dot, squared_distance, Matrix};
use crate::par::Execution;

/// Feature rows with class ids in `0..n_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatures {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl LabeledFeatures {
    pub fn new(features: Matrix, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(shape(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.rows()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        Ok(Self {
            features,
            labels,
            n_classes,
        })
    }

    /// Number of classes taken as `max label + 1`.
    pub fn with_inferred_classes(features: Matrix, labels: Vec<usize>) -> Result<Self> {
        let n_classes = labels.iter().max().map_or(1, |m| m + 1);
        Self::new(features, labels, n_classes)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }
}

fn check_query(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(shape(format!("query has {got} features, model expects {expected}")));
    }
    Ok(())
}

/// Label of the closest training row (Euclidean); ties go to the lowest row index.
pub fn nn_classify(train: &LabeledFeatures, query: &[f64]) -> Result<usize> {
    check_query(train.dim(), query.len())?;
    let mut best = (f64::INFINITY, 0usize);
    for i in 0..train.len() {
        let d = squared_distance(train.features.row(i), query);
        if d < best.0 {
            best = (d, i);
        }
    }
    Ok(train.labels[best.1])
}

pub fn nn_classify_batch(
    train: &LabeledFeatures,
    queries: &Matrix,
    exec: Execution,
) -> Result<Vec<usize>> {
    check_query(train.dim(), queries.cols())?;
    exec.map_range(queries.rows(), |i| nn_classify(train, queries.row(i)))
        .into_iter()
        .collect()
}

/// `K_ij = exp(−‖a_i − b_j‖² / (2σ²))`.
pub fn rbf_kernel(a: &Matrix, b: &Matrix, sigma: f64, exec: Execution) -> Result<Matrix> {
    if a.cols() != b.cols() {
        return Err(shape(format!(
            "kernel inputs have {} and {} columns",
            a.cols(),
            b.cols()
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let scale = -1.0 / (2.0 * sigma * sigma);
    let mut out = Matrix::zeros(a.rows(), b.rows());
    let width = b.rows();
    exec.for_each_row(out.as_mut_slice(), width, |i, row| {
        for (j, k) in row.iter_mut().enumerate() {
            *k = (scale * squared_distance(a.row(i), b.row(j))).exp();
        }
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "SigmaRepr", into = "SigmaRepr")]
pub enum Sigma {
    /// σ² = median pairwise squared distance of the training rows (1 if that is 0).
    #[default]
    AutoMedian,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SigmaRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<SigmaRepr> for Sigma {
    type Error = String;

    fn try_from(r: SigmaRepr) -> std::result::Result<Self, String> {
        match r {
            SigmaRepr::Number(v) => Ok(Sigma::Fixed(v)),
            SigmaRepr::Text(s) if s == "auto" => Ok(Sigma::AutoMedian),
            SigmaRepr::Text(s) => s
                .parse()
                .map(Sigma::Fixed)
                .map_err(|_| format!("sigma must be \"auto\" or a number, got {s:?}")),
        }
    }
}

impl From<Sigma> for SigmaRepr {
    fn from(s: Sigma) -> Self {
        match s {
            Sigma::AutoMedian => SigmaRepr::Text("auto".into()),
            Sigma::Fixed(v) => SigmaRepr::Number(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KrrParams {
    pub sigma: Sigma,
    pub c: f64,
}

impl Default for KrrParams {
    fn default() -> Self {
        Self {
            sigma: Sigma::AutoMedian,
            c: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KrrModel {
    pub train_features: Matrix,
    pub sigma: f64,
    /// `n × C` solution of `(K + cI)A = Y`.
    pub dual_weights: Matrix,
}

impl KrrModel {
    pub fn n_classes(&self) -> usize {
        self.dual_weights.cols()
    }
}

/// Median of the pairwise squared distances between rows (i < j).
pub fn median_squared_distance(x: &Matrix, exec: Execution) -> f64 {
    let n = x.rows();
    let mut d: Vec<f64> = exec
        .map_range(n, |i| {
            (i + 1..n)
                .map(|j| squared_distance(x.row(i), x.row(j)))
                .collect::<Vec<_>>()
        })
        .concat();
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len() / 2;
    if d.len() % 2 == 1 {
        d[m]
    } else {
        0.5 * (d[m - 1] + d[m])
    }
}

pub fn resolve_sigma(train: &Matrix, sigma: Sigma, exec: Execution) -> f64 {
    match sigma {
        Sigma::Fixed(s) => s,
        Sigma::AutoMedian => {
            let med = median_squared_distance(train, exec);
            if med > 0.0 {
                med.sqrt()
            } else {
                1.0
            }
        }
    }
}

pub fn krr_fit(train: &LabeledFeatures, params: &KrrParams, exec: Execution) -> Result<KrrModel> {
    if !(params.c > 0.0) {
        return Err(Error::InvalidParameter(format!("c must be positive, got {}", params.c)));
    }
    if let Sigma::Fixed(s) = params.sigma {
        if !(s > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {s}")));
        }
    }
    let sigma = resolve_sigma(&train.features, params.sigma, exec);
    let n = train.len();
    let mut k = rbf_kernel(&train.features, &train.features, sigma, exec)?;
    for i in 0..n {
        k[(i, i)] += params.c;
    }
    let mut y = Matrix::zeros(n, train.n_classes);
    for (i, &l) in train.labels.iter().enumerate() {
        y[(i, l)] = 1.0;
    }
    let factor = SpdFactor::new(k.to_nalgebra()).ok_or(Error::SolveFailure)?;
    let dual_weights = factor.solve_matrix(&y);
    if dual_weights.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::SolveFailure);
    }
    Ok(KrrModel {
        train_features: train.features.clone(),
        sigma,
        dual_weights,
    })
}

/// Per-class scores `k(query, train)ᵀ A`.
pub fn krr_scores(model: &KrrModel, query: &[f64]) -> Result<Vec<f64>> {
    check_query(model.train_features.cols(), query.len())?;
    let scale = -1.0 / (2.0 * model.sigma * model.sigma);
    let kq: Vec<f64> = (0..model.train_features.rows())
        .map(|i| (scale * squared_distance(model.train_features.row(i), query)).exp())
        .collect();
    Ok((0..model.n_classes())
        .map(|c| dot(&kq, &model.dual_weights.col(c)))
        .collect())
}

/// Argmax of [`krr_scores`]; ties go to the lowest class id.
pub fn krr_predict(model: &KrrModel, query: &[f64]) -> Result<usize> {
    let scores = krr_scores(model, query)?;
    let mut best = 0;
    for (c, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = c;
        }
    }
    Ok(best)
}

pub fn krr_predict_batch(model: &KrrModel, queries: &Matrix, exec: Execution) -> Result<Vec<usize>> {
    check_query(model.train_features.cols(), queries.cols())?;
    exec.map_range(queries.rows(), |i| krr_predict(model, queries.row(i)))
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64], labels: &[usize]) -> LabeledFeatures {
        let m = Matrix::new(points.len(), 1, points.to_vec()).unwrap();
        LabeledFeatures::with_inferred_classes(m, labels.to_vec()).unwrap()
    }

    #[test]
    fn nn_examples() {
        let train = line(&[0.0, 10.0], &[0, 1]);
        assert_eq!(nn_classify(&train, &[4.0]).unwrap(), 0);
        assert_eq!(nn_classify(&train, &[10.0]).unwrap(), 1);
        // equidistant: lower row index wins
        let tied = line(&[-1.0, 1.0], &[1, 0]);
        assert_eq!(nn_classify(&tied, &[0.0]).unwrap(), 1);
        assert!(nn_classify(&train, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn labels_validated() {
        let m = Matrix::zeros(2, 1);
        assert!(LabeledFeatures::new(m.clone(), vec![0], 1).is_err());
        assert!(LabeledFeatures::new(m, vec![0, 3], 2).is_err());
    }

    #[test]
    fn kernel_examples() {
        let a = Matrix::new(1, 2, vec![0.3, -0.7]).unwrap();
        let k = rbf_kernel(&a, &a, 0.5, Execution::Sequential).unwrap();
        assert_eq!(k.as_slice(), &[1.0]);
        // ‖a − b‖² = 2σ² gives e^{-1}
        let sigma = 1.5;
        let b = Matrix::new(1, 2, vec![0.3 + (2.0f64 * sigma * sigma).sqrt(), -0.7]).unwrap();
        let k = rbf_kernel(&a, &b, sigma, Execution::Sequential).unwrap();
        assert!((k[(0, 0)] - (-1.0f64).exp()).abs() < 1e-14);
        assert!(rbf_kernel(&a, &Matrix::zeros(1, 3), 1.0, Execution::Sequential).is_err());
    }

    #[test]
    fn single_point_predicts_its_class() {
        let train = LabeledFeatures::new(Matrix::new(1, 2, vec![1.0, 1.0]).unwrap(), vec![2], 3)
            .unwrap();
        let model = krr_fit(&train, &KrrParams::default(), Execution::Sequential).unwrap();
        assert_eq!(model.sigma, 1.0);
        for q in [[0.0, 0.0], [5.0, -3.0], [1.0, 1.0]] {
            assert_eq!(krr_predict(&model, &q).unwrap(), 2);
        }
    }

    #[test]
    fn one_class_always_zero() {
        let train = line(&[0.0, 1.0, 2.0], &[0, 0, 0]);
        let model = krr_fit(&train, &KrrParams::default(), Execution::Sequential).unwrap();
        assert_eq!(krr_predict(&model, &[100.0]).unwrap(), 0);
    }

    #[test]
    fn median_heuristic() {
        let x = Matrix::new(3, 1, vec![0.0, 1.0, 3.0]).unwrap();
        // squared distances 1, 9, 4
        assert_eq!(median_squared_distance(&x, Execution::Sequential), 4.0);
        let y = Matrix::new(4, 1, vec![0.0, 1.0, 2.0, 4.0]).unwrap();
        // 1, 4, 16, 1, 9, 4 -> sorted 1 1 4 4 9 16
        assert_eq!(median_squared_distance(&y, Execution::Parallel), 4.0);
        let same = Matrix::new(2, 1, vec![3.0, 3.0]).unwrap();
        assert_eq!(resolve_sigma(&same, Sigma::AutoMedian, Execution::Sequential), 1.0);
    }

    #[test]
    fn rejects_bad_params() {
        let train = line(&[0.0, 1.0], &[0, 1]);
        let p = KrrParams { sigma: Sigma::AutoMedian, c: 0.0 };
        assert!(krr_fit(&train, &p, Execution::Sequential).is_err());
        let p = KrrParams { sigma: Sigma::Fixed(-1.0), c: 1.0 };
        assert!(krr_fit(&train, &p, Execution::Sequential).is_err());
    }
}
