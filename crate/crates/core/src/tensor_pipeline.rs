//! Tensor sparse PCA: reduce modes 1 and 2 with sparse PCA on their
//! unfoldings, then run sparse PCA per person on mode 3 and merge.

use serde::{Deserialize, Serialize};

use crate::admm::AdmmParams;
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::spca::{fit_with, SparsePcaModel};
use crate::tensor::{merge_mode3, refold, slice_mode3, unfold, Mode, PersonPartition, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode3Policy {
    /// Keep every person's image count.
    #[default]
    Keep,
    /// Reduce every person to `d3` mode-3 components.
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Application {
    /// Fit and apply independently on each split.
    #[default]
    PerSplit,
    /// Mode-1/2 loadings fitted on the training tensor are applied to the
    /// test tensor. Mode 3 is still fitted per split: its features are the
    /// per-person image counts, which differ between splits.
    FitTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TensorPcaConfig {
    pub dim1: usize,
    pub dim2: usize,
    pub mode3: Mode3Policy,
    pub admm: AdmmParams,
    pub application: Application,
}

impl Default for TensorPcaConfig {
    fn default() -> Self {
        Self {
            dim1: 25,
            dim2: 25,
            mode3: Mode3Policy::Keep,
            admm: AdmmParams::default(),
            application: Application::PerSplit,
        }
    }
}

impl TensorPcaConfig {
    pub fn validate(&self, dims: (usize, usize, usize), part: &PersonPartition) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.dim1 == 0 || self.dim1 > dims.0 {
            return bad(format!("dim1 must be in 1..={}, got {}", dims.0, self.dim1));
        }
        if self.dim2 == 0 || self.dim2 > dims.1 {
            return bad(format!("dim2 must be in 1..={}, got {}", dims.1, self.dim2));
        }
        if let Mode3Policy::Fixed(d3) = self.mode3 {
            if d3 == 0 || d3 > part.min_count() {
                return bad(format!(
                    "mode-3 dimension must be in 1..={}, got {d3}",
                    part.min_count()
                ));
            }
        }
        self.admm.validate()
    }
}

/// Partition of the output tensor's mode 3 under `policy`.
pub fn output_partition(part: &PersonPartition, policy: Mode3Policy) -> Result<PersonPartition> {
    match policy {
        Mode3Policy::Keep => Ok(part.clone()),
        Mode3Policy::Fixed(d3) => PersonPartition::uniform(part.persons(), d3),
    }
}

fn replace_dim(dims: (usize, usize, usize), mode: Mode, dim: usize) -> (usize, usize, usize) {
    match mode {
        Mode::One => (dim, dims.1, dims.2),
        Mode::Two => (dims.0, dim, dims.2),
        Mode::Three => (dims.0, dims.1, dim),
    }
}

/// Unfold along `mode`, fit sparse PCA with `dim` components, project,
/// and refold with that mode shrunk to `dim`.
pub fn reduce_mode(
    t: &Tensor3,
    mode: Mode,
    dim: usize,
    admm: &AdmmParams,
    exec: Execution,
) -> Result<(Tensor3, SparsePcaModel)> {
    if mode == Mode::Three {
        return Err(Error::InvalidParameter(
            "mode 3 is reduced per person; use per_person_mode3".into(),
        ));
    }
    let unfolded = unfold(t, mode);
    let model = fit_with(&unfolded, dim, admm, exec)?;
    let reduced = apply_mode(t, mode, &model, exec)?;
    Ok((reduced, model))
}

/// Projects mode `mode` of `t` with an already-fitted model.
pub fn apply_mode(
    t: &Tensor3,
    mode: Mode,
    model: &SparsePcaModel,
    exec: Execution,
) -> Result<Tensor3> {
    let projected = model.transform(&unfold(t, mode), exec)?;
    refold(&projected, mode, replace_dim(t.dims(), mode, model.dim()))
}

/// Sparse PCA on each person's mode-3 unfolding; results merged in person order.
pub fn per_person_mode3(
    t: &Tensor3,
    part: &PersonPartition,
    policy: Mode3Policy,
    admm: &AdmmParams,
    exec: Execution,
) -> Result<Tensor3> {
    let people = slice_mode3(t, part)?;
    let reduced: Vec<Result<Tensor3>> = exec.map_range(people.len(), |i| {
        let sub = &people[i];
        let d3 = match policy {
            Mode3Policy::Keep => sub.n3(),
            Mode3Policy::Fixed(d) => d,
        };
        let unfolded = unfold(sub, Mode::Three);
        let model = fit_with(&unfolded, d3, admm, exec).map_err(|e| e.in_person(i))?;
        let projected = model.transform(&unfolded, exec)?;
        let (n1, n2, _) = sub.dims();
        refold(&projected, Mode::Three, (n1, n2, d3))
    });
    let reduced = reduced.into_iter().collect::<Result<Vec<_>>>()?;
    merge_mode3(&reduced)
}

/// Fitted mode-1 and mode-2 models of one tensor reduction.
#[derive(Debug, Clone)]
pub struct ModeModels {
    pub mode1: SparsePcaModel,
    pub mode2: SparsePcaModel,
}

/// Full reduction of a single tensor, fitting everything on `t` itself.
pub fn tensor_sparse_pca(t: &Tensor3, part: &PersonPartition, cfg: &TensorPcaConfig) -> Result<Tensor3> {
    tensor_sparse_pca_with(t, part, cfg, Execution::default()).map(|(out, _)| out)
}

pub fn tensor_sparse_pca_with(
    t: &Tensor3,
    part: &PersonPartition,
    cfg: &TensorPcaConfig,
    exec: Execution,
) -> Result<(Tensor3, ModeModels)> {
    cfg.validate(t.dims(), part)?;
    let (y1, mode1) = reduce_mode(t, Mode::One, cfg.dim1, &cfg.admm, exec)?;
    let (y2, mode2) = reduce_mode(&y1, Mode::Two, cfg.dim2, &cfg.admm, exec)?;
    let out = per_person_mode3(&y2, part, cfg.mode3, &cfg.admm, exec)?;
    Ok((out, ModeModels { mode1, mode2 }))
}

/// Reduces a train/test pair according to `cfg.application`.
pub fn reduce_split(
    train: (&Tensor3, &PersonPartition),
    test: (&Tensor3, &PersonPartition),
    cfg: &TensorPcaConfig,
    exec: Execution,
) -> Result<(Tensor3, Tensor3)> {
    let (train_out, models) = tensor_sparse_pca_with(train.0, train.1, cfg, exec)?;
    let test_out = match cfg.application {
        Application::PerSplit => tensor_sparse_pca_with(test.0, test.1, cfg, exec)?.0,
        Application::FitTransform => {
            cfg.validate(test.0.dims(), test.1)?;
            let y1 = apply_mode(test.0, Mode::One, &models.mode1, exec)?;
            let y2 = apply_mode(&y1, Mode::Two, &models.mode2, exec)?;
            per_person_mode3(&y2, test.1, cfg.mode3, &cfg.admm, exec)?
        }
    };
    Ok((train_out, test_out))
}
