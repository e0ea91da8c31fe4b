//! Sparse PCA by repeated ADMM extraction and deflation.

use log::warn;

use crate::admm::{self, AdmmParams, FailurePolicy, Rho, XUpdate};
use crate::error::{shape, Error, Result};
use crate::linalg::{self, fix_sign};
use crate::matrix::{dot, norm, Matrix};
use crate::par::Execution;

/// `ρ = max(4.4·σ_max², 1)`. The x-subproblem needs `ρ > 2σ²`; the dual
/// iteration is only stable above `4σ²`.
pub const AUTO_RHO_FACTOR: f64 = 4.4;

/// Relative cutoff on squared singular values when counting the numerical
/// rank of the centered data.
const RANK_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CenteredData {
    pub dtilde: Matrix,
    pub mu: Vec<f64>,
}

/// Subtracts the mean row from every row.
pub fn center(d: &Matrix) -> CenteredData {
    let (n, p) = d.shape();
    let mut mu = vec![0.0; p];
    for i in 0..n {
        for (m, v) in mu.iter_mut().zip(d.row(i)) {
            *m += v;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n as f64);
    let mut dtilde = d.clone();
    for i in 0..n {
        for (v, m) in dtilde.row_mut(i).iter_mut().zip(&mu) {
            *v -= m;
        }
    }
    CenteredData { dtilde, mu }
}

pub fn auto_rho(dtilde: &Matrix) -> f64 {
    auto_rho_with(dtilde, Execution::Sequential)
}

pub fn auto_rho_with(dtilde: &Matrix, exec: Execution) -> f64 {
    let s2 = linalg::largest_squared_singular_value(dtilde, exec);
    (AUTO_RHO_FACTOR * s2).max(1.0)
}

/// `D̃(I − xxᵀ)`.
pub fn deflate(dtilde: &Matrix, x: &[f64]) -> Matrix {
    assert_eq!(x.len(), dtilde.cols());
    let proj = dtilde.matvec(x);
    let mut out = dtilde.clone();
    for (i, pi) in proj.iter().enumerate() {
        for (v, xj) in out.row_mut(i).iter_mut().zip(x) {
            *v -= pi * xj;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentSource {
    Admm,
    /// Sparse solve collapsed to zero; re-solved with `λ = 0`.
    DenseFallback,
    /// Beyond the numerical rank of the data: a deterministic null-space direction.
    Completion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentInfo {
    pub source: ComponentSource,
    pub iterations: usize,
    pub converged: bool,
    pub rho: f64,
    pub lambda: f64,
    pub nonzeros: usize,
    /// `‖D̃·x‖` after deflating by this component.
    pub deflation_residual: f64,
    /// `‖D̃‖_F` of the matrix the component was extracted from.
    pub data_norm: f64,
}

#[derive(Debug, Clone)]
pub struct Component {
    pub loading: Vec<f64>,
    pub info: ComponentInfo,
}

fn resolve_rho(dtilde: &Matrix, rho: Rho, exec: Execution) -> f64 {
    match rho {
        Rho::Auto => auto_rho_with(dtilde, exec),
        Rho::Fixed(r) => r,
    }
}

/// Turns the final iterate into a unit loading: coordinates that the
/// z-step zeroed are zeroed in x, then x is normalized and sign-fixed.
fn finish(outcome: &admm::AdmmOutcome) -> Result<Vec<f64>> {
    let st = &outcome.state;
    let degenerate = st.z.iter().all(|v| *v == 0.0) || norm(&st.x) <= 1e-12;
    if degenerate {
        return Err(Error::DegenerateComponent {
            lambda: outcome.lambda,
            rho: outcome.rho,
        });
    }
    let mut x: Vec<f64> = st
        .x
        .iter()
        .zip(&st.z)
        .map(|(xi, zi)| if *zi == 0.0 { 0.0 } else { *xi })
        .collect();
    let len = norm(&x);
    x.iter_mut().for_each(|v| *v /= len);
    fix_sign(&mut x);
    Ok(x)
}

/// Extracts one unit loading vector from `dtilde`.
pub fn extract_component(dtilde: &Matrix, params: &AdmmParams) -> Result<Vec<f64>> {
    extract_component_with(dtilde, params, 0, Execution::Sequential).map(|c| c.loading)
}

/// [`extract_component`] with an explicit init stream and full diagnostics.
pub fn extract_component_with(
    dtilde: &Matrix,
    params: &AdmmParams,
    stream: u64,
    exec: Execution,
) -> Result<Component> {
    params.validate()?;
    let rho = resolve_rho(dtilde, params.rho, exec);
    let solver = XUpdate::new(dtilde, rho, exec)?;
    let lambda = params.lambda.resolve(rho);
    let data_norm = dtilde.frobenius_norm();

    let attempt = |lambda: f64| -> Result<(admm::AdmmOutcome, Vec<f64>)> {
        let out = admm::run(&solver, lambda, params, stream)?;
        if !out.converged && params.on_failure == FailurePolicy::Error {
            return Err(Error::MaxIterExceeded {
                max_iter: params.max_iter,
                last_step: out.last_step,
            });
        }
        if !out.converged {
            warn!(
                "ADMM stopped after {} iterations (step {:e}); keeping last iterate",
                out.state.k, out.last_step
            );
        }
        let x = finish(&out)?;
        Ok((out, x))
    };

    let (outcome, loading, source) = match attempt(lambda) {
        Ok((o, x)) => (o, x, ComponentSource::Admm),
        Err(Error::DegenerateComponent { .. })
            if params.on_failure == FailurePolicy::Fallback && lambda > 0.0 =>
        {
            warn!("component collapsed at lambda = {lambda:e}; re-solving with lambda = 0");
            let (o, x) = attempt(0.0)?;
            (o, x, ComponentSource::DenseFallback)
        }
        Err(e) => return Err(e),
    };
    let nonzeros = loading.iter().filter(|v| **v != 0.0).count();
    Ok(Component {
        loading,
        info: ComponentInfo {
            source,
            iterations: outcome.state.k,
            converged: outcome.converged,
            rho,
            lambda: outcome.lambda,
            nonzeros,
            deflation_residual: f64::NAN,
            data_norm,
        },
    })
}

/// Training mean plus `p × dim` unit-norm loadings.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePcaModel {
    pub mu: Vec<f64>,
    pub loadings: Matrix,
    /// Per-component diagnostics; empty for models read from disk.
    pub components: Vec<ComponentInfo>,
}

impl SparsePcaModel {
    pub fn new(mu: Vec<f64>, loadings: Matrix) -> Result<Self> {
        if mu.len() != loadings.rows() {
            return Err(shape(format!(
                "mean has {} entries but loadings have {} rows",
                mu.len(),
                loadings.rows()
            )));
        }
        Ok(Self {
            mu,
            loadings,
            components: Vec::new(),
        })
    }

    pub fn features(&self) -> usize {
        self.mu.len()
    }

    pub fn dim(&self) -> usize {
        self.loadings.cols()
    }

    /// The model restricted to its first `dim` components. Because each
    /// component's init depends only on the seed and its index, this equals
    /// a fresh fit with the smaller `dim`.
    pub fn truncate(&self, dim: usize) -> Result<SparsePcaModel> {
        if dim == 0 || dim > self.dim() {
            return Err(shape(format!("cannot truncate {} components to {dim}", self.dim())));
        }
        Ok(SparsePcaModel {
            mu: self.mu.clone(),
            loadings: self.loadings.leading_columns(dim),
            components: self.components.iter().take(dim).cloned().collect(),
        })
    }

    pub fn transform(&self, d_new: &Matrix, exec: Execution) -> Result<Matrix> {
        project(&self.mu, &self.loadings, d_new, exec)
    }
}

/// `(d − 1·μᵀ)·W`.
pub(crate) fn project(mu: &[f64], w: &Matrix, d_new: &Matrix, exec: Execution) -> Result<Matrix> {
    if d_new.cols() != mu.len() {
        return Err(shape(format!(
            "data has {} columns, model expects {}",
            d_new.cols(),
            mu.len()
        )));
    }
    let mut centered = d_new.clone();
    exec.for_each_row(centered.as_mut_slice(), mu.len(), |_, row| {
        for (v, m) in row.iter_mut().zip(mu) {
            *v -= m;
        }
    });
    centered.matmul(w, exec)
}

pub fn transform(model: &SparsePcaModel, d_new: &Matrix) -> Result<Matrix> {
    model.transform(d_new, Execution::default())
}

pub fn fit(d: &Matrix, dim: usize, params: &AdmmParams) -> Result<SparsePcaModel> {
    fit_with(d, dim, params, Execution::default())
}

/// Sparse PCA: `dim` loadings from successive extraction and deflation of
/// the centered data.
pub fn fit_with(
    d: &Matrix,
    dim: usize,
    params: &AdmmParams,
    exec: Execution,
) -> Result<SparsePcaModel> {
    params.validate()?;
    let (n, p) = d.shape();
    if dim == 0 || dim > p {
        return Err(Error::InvalidParameter(format!(
            "dim must be in 1..={p}, got {dim}"
        )));
    }
    if dim > (n.saturating_sub(1)).min(p) {
        warn!(
            "dim = {dim} exceeds the rank bound min(n-1, p) = {}; trailing components carry no variance",
            (n.saturating_sub(1)).min(p)
        );
    }
    let CenteredData { dtilde, mu } = center(d);
    let row_space = linalg::row_space_basis(&dtilde, RANK_REL_TOL, exec);
    let rank = row_space.len();
    let completions = if dim > rank {
        linalg::orthonormal_completion(&row_space, p, dim - rank)
    } else {
        Vec::new()
    };

    let mut current = dtilde;
    let mut loadings = Vec::with_capacity(dim);
    let mut infos = Vec::with_capacity(dim);
    let mut completions = completions.into_iter();
    for i in 0..dim {
        let mut comp = if i < rank {
            extract_component_with(&current, params, i as u64, exec)
                .map_err(|e| e.in_component(i))?
        } else {
            let loading = completions.next().expect("completion count matches");
            Component {
                info: ComponentInfo {
                    source: ComponentSource::Completion,
                    iterations: 0,
                    converged: true,
                    rho: f64::NAN,
                    lambda: f64::NAN,
                    nonzeros: loading.iter().filter(|v| **v != 0.0).count(),
                    deflation_residual: f64::NAN,
                    data_norm: current.frobenius_norm(),
                },
                loading,
            }
        };
        let next = deflate(&current, &comp.loading);
        comp.info.deflation_residual = norm(&next.matvec(&comp.loading));
        debug_assert!(
            comp.info.deflation_residual <= 1e-8 * comp.info.data_norm,
            "component {i}: deflation left {:e} of {:e}",
            comp.info.deflation_residual,
            comp.info.data_norm
        );
        current = next;
        loadings.push(comp.loading);
        infos.push(comp.info);
    }
    Ok(SparsePcaModel {
        mu,
        loadings: Matrix::from_columns(&loadings)?,
        components: infos,
    })
}

/// Absolute cosine between two vectors.
pub fn abs_cosine(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).abs() / (norm(a) * norm(b))
}
