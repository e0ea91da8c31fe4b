//! Sparse PCA by ADMM, a tensor extension that reduces image stacks mode by
//! mode, PCA baselines, and a small face-recognition experiment harness.
//!
//! ```
//! use tensor_spca::{fit, AdmmParams, Matrix};
//!
//! let d = Matrix::from_rows(&[
//!     vec![2.0, 0.1, 0.0],
//!     vec![-2.0, 0.0, 0.1],
//!     vec![1.0, -0.1, 0.0],
//!     vec![-1.0, 0.0, -0.1],
//! ])
//! .unwrap();
//! let model = fit(&d, 1, &AdmmParams::default()).unwrap();
//! assert!(model.loadings[(0, 0)].abs() > 0.99);
//! ```

pub mod admm;
pub mod classify;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod par;
pub mod pca;
pub mod persist;
pub mod spca;
pub mod tensor;
pub mod tensor_pipeline;

pub use admm::{AdmmParams, FailurePolicy, Lambda, Rho};
pub use classify::{KrrModel, KrrParams, LabeledFeatures, Sigma};
pub use dataset::{Dataset, SynthSpec};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, ExperimentResults};
pub use matrix::Matrix;
pub use metrics::{evaluate, EvalReport};
pub use par::Execution;
pub use pca::{pca_fit, pca_transform, PcaModel};
pub use spca::{fit, transform, SparsePcaModel};
pub use tensor::{Mode, PersonPartition, Tensor3};
pub use tensor_pipeline::{tensor_sparse_pca, TensorPcaConfig};
