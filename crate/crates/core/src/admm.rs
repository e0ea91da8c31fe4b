//! ADMM for a single sparse loading vector.
//!
//! Solves `minimize -‖D̃x‖² + λ‖z‖₁  s.t.  x = z, ‖z‖ ≤ 1` with the
//! scaled-free updates
//!
//! ```text
//! x ← (ρI − 2D̃ᵀD̃)⁻¹ (ρz − y)
//! z ← Π_ball( S_{λ/ρ}(x + y/ρ) )
//! y ← y + ρ(x − z)
//! ```
//!
//! where `S_κ` is soft-thresholding and `Π_ball` the projection onto the
//! unit Euclidean ball. The projection is what keeps the iterates bounded:
//! the objective is concave in `x` and unbounded below without it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SpdFactor;
use crate::matrix::{norm, Matrix};
use crate::par::Execution;

/// Penalty parameter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RhoRepr", into = "RhoRepr")]
pub enum Rho {
    /// Resolved per component by [`crate::spca::auto_rho`].
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RhoRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<RhoRepr> for Rho {
    type Error = String;

    fn try_from(r: RhoRepr) -> std::result::Result<Self, String> {
        match r {
            RhoRepr::Number(v) => Ok(Rho::Fixed(v)),
            RhoRepr::Text(s) if s == "auto" => Ok(Rho::Auto),
            RhoRepr::Text(s) => s
                .parse()
                .map(Rho::Fixed)
                .map_err(|_| format!("rho must be \"auto\" or a number, got {s:?}")),
        }
    }
}

impl From<Rho> for RhoRepr {
    fn from(r: Rho) -> Self {
        match r {
            Rho::Auto => RhoRepr::Text("auto".into()),
            Rho::Fixed(v) => RhoRepr::Number(v),
        }
    }
}

/// Sparsity weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lambda {
    /// `λ = f · ρ`, evaluated after ρ is resolved.
    RelativeToRho(f64),
    Absolute(f64),
}

impl Default for Lambda {
    fn default() -> Self {
        Lambda::RelativeToRho(0.01)
    }
}

impl Lambda {
    pub fn resolve(self, rho: f64) -> f64 {
        match self {
            Lambda::RelativeToRho(f) => f * rho,
            Lambda::Absolute(v) => v,
        }
    }
}

/// What [`crate::spca::extract_component`] does when the iteration fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    /// Return `MaxIterExceeded` / `DegenerateComponent`.
    #[default]
    Error,
    /// Keep the last iterate when out of iterations; retry with `λ = 0`
    /// when the component collapses to zero.
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdmmParams {
    pub rho: Rho,
    pub lambda: Lambda,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub on_failure: FailurePolicy,
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self {
            rho: Rho::Auto,
            lambda: Lambda::default(),
            tol: 1e-10,
            max_iter: 10_000,
            seed: 0,
            on_failure: FailurePolicy::Error,
        }
    }
}

impl AdmmParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        match self.lambda {
            Lambda::RelativeToRho(v) | Lambda::Absolute(v) if !(v >= 0.0 && v.is_finite()) => {
                return bad(format!("lambda must be nonnegative, got {v}"));
            }
            _ => {}
        }
        if let Rho::Fixed(r) = self.rho {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("rho must be positive, got {r}"));
            }
        }
        Ok(())
    }
}

/// Cached solver for the x-subproblem `(ρI − 2D̃ᵀD̃) x = b`.
///
/// With `n < p` the `n × n` matrix `I − (2/ρ)D̃D̃ᵀ` is factored instead and
/// the inverse is applied through
/// `(ρI − 2D̃ᵀD̃)⁻¹ = (1/ρ)(I + (2/ρ) D̃ᵀ (I − (2/ρ)D̃D̃ᵀ)⁻¹ D̃)`.
/// Either factorization exists exactly when `ρ > 2σ_max(D̃)²`.
pub struct XUpdate<'a> {
    dtilde: &'a Matrix,
    rho: f64,
    factor: XFactor,
}

enum XFactor {
    Full(SpdFactor),
    Gram(SpdFactor),
}

impl<'a> XUpdate<'a> {
    pub fn new(dtilde: &'a Matrix, rho: f64, exec: Execution) -> Result<Self> {
        let (n, p) = dtilde.shape();
        let factor = if n < p {
            let mut k = dtilde.gram_rows(exec).to_nalgebra();
            k *= -2.0 / rho;
            for i in 0..n {
                k[(i, i)] += 1.0;
            }
            XFactor::Gram(SpdFactor::new(k).ok_or(Error::NotPositiveDefinite { rho })?)
        } else {
            let mut m = dtilde.gram_cols(exec).to_nalgebra();
            m *= -2.0;
            for i in 0..p {
                m[(i, i)] += rho;
            }
            XFactor::Full(SpdFactor::new(m).ok_or(Error::NotPositiveDefinite { rho })?)
        };
        Ok(Self {
            dtilde,
            rho,
            factor,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Solves `(ρI − 2D̃ᵀD̃) x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        match &self.factor {
            XFactor::Full(f) => f.solve(rhs),
            XFactor::Gram(f) => {
                let u = f.solve(&self.dtilde.matvec(rhs));
                let back = self.dtilde.tr_matvec(&u);
                let c = 2.0 / self.rho;
                rhs.iter()
                    .zip(&back)
                    .map(|(b, w)| (b + c * w) / self.rho)
                    .collect()
            }
        }
    }

    /// `x = (ρI − 2D̃ᵀD̃)⁻¹ (ρz − y)`.
    pub fn apply(&self, z: &[f64], y: &[f64]) -> Vec<f64> {
        let rhs: Vec<f64> = z.iter().zip(y).map(|(zi, yi)| self.rho * zi - yi).collect();
        self.solve(&rhs)
    }
}

/// One-shot x-update; factors the system on every call.
pub fn x_update(dtilde: &Matrix, z: &[f64], y: &[f64], rho: f64) -> Result<Vec<f64>> {
    let p = dtilde.cols();
    if z.len() != p || y.len() != p {
        return Err(crate::error::shape("z and y must have one entry per column of D̃"));
    }
    Ok(XUpdate::new(dtilde, rho, Execution::Sequential)?.apply(z, y))
}

/// `sign(v)·max(|v| − κ, 0)`, elementwise.
pub fn soft_threshold(v: &[f64], kappa: f64) -> Vec<f64> {
    debug_assert!(kappa >= 0.0);
    v.iter().map(|&vi| soft_threshold_scalar(vi, kappa)).collect()
}

#[inline]
pub fn soft_threshold_scalar(v: f64, kappa: f64) -> f64 {
    if v > kappa {
        v - kappa
    } else if v < -kappa {
        v + kappa
    } else {
        0.0
    }
}

/// Per-coordinate minimizer of `λ|z| − y z + (ρ/2)(x − z)²`.
pub fn z_update(x: &[f64], y: &[f64], rho: f64, lambda: f64) -> Vec<f64> {
    x.iter()
        .zip(y)
        .map(|(xi, yi)| soft_threshold_scalar(xi + yi / rho, lambda / rho))
        .collect()
}

pub fn y_update(y: &[f64], x: &[f64], z: &[f64], rho: f64) -> Vec<f64> {
    y.iter()
        .zip(x.iter().zip(z))
        .map(|(yi, (xi, zi))| yi + rho * (xi - zi))
        .collect()
}

/// Scales `v` onto the unit ball if it lies outside.
pub fn project_unit_ball(v: &mut [f64]) {
    let len = norm(v);
    if len > 1.0 {
        v.iter_mut().for_each(|x| *x /= len);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub k: usize,
}

impl AdmmState {
    /// `y⁰ = 0`, `z⁰` a seeded unit-norm Gaussian vector, `x⁰ = z⁰`.
    /// `stream` separates the draws of different components under one seed.
    pub fn init(p: usize, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let len = norm(&z);
        if len > 0.0 {
            z.iter_mut().for_each(|v| *v /= len);
        }
        Self {
            x: z.clone(),
            z,
            y: vec![0.0; p],
            k: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdmmOutcome {
    pub state: AdmmState,
    pub converged: bool,
    /// `‖x^{k+1} − x^k‖` of the final iteration.
    pub last_step: f64,
    pub rho: f64,
    pub lambda: f64,
}

/// Runs the iteration to `‖x^{k+1} − x^k‖ ≤ tol` or `max_iter`.
/// Non-convergence is reported through `converged`, not as an error.
pub fn run(
    solver: &XUpdate<'_>,
    lambda: f64,
    params: &AdmmParams,
    stream: u64,
) -> Result<AdmmOutcome> {
    let rho = solver.rho();
    let p = solver.dtilde.cols();
    let mut state = AdmmState::init(p, params.seed, stream);
    let mut last_step = f64::INFINITY;
    let mut converged = false;
    while state.k < params.max_iter {
        let x = solver.apply(&state.z, &state.y);
        let mut z = z_update(&x, &state.y, rho, lambda);
        project_unit_ball(&mut z);
        let y = y_update(&state.y, &x, &z, rho);
        last_step = x
            .iter()
            .zip(&state.x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        state = AdmmState {
            x,
            z,
            y,
            k: state.k + 1,
        };
        if !last_step.is_finite() || state.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { iteration: state.k });
        }
        if last_step <= params.tol {
            converged = true;
            break;
        }
    }
    Ok(AdmmOutcome {
        state,
        converged,
        last_step,
        rho,
        lambda,
    })
}
