//! Runs every feature variant against every classifier and tabulates accuracy.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use crate::admm::{AdmmParams, FailurePolicy, Lambda};
use crate::classify::{krr_fit, krr_predict_batch, nn_classify_batch, KrrParams, LabeledFeatures};
use crate::dataset::{load_csv_dataset, load_pgm_dir, synth_blobs, Dataset, SynthSpec};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{evaluate, EvalReport};
use crate::par::Execution;
use crate::pca::{pca_fit, PcaModel};
use crate::spca::{fit_with, SparsePcaModel};
use crate::tensor::flatten_slabs;
use crate::tensor_pipeline::{
    output_partition, reduce_split, Application, Mode3Policy, TensorPcaConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synth(SynthSpec),
    Csv {
        train: PathBuf,
        test: PathBuf,
        height: usize,
        width: usize,
    },
    Pgm {
        train_dir: PathBuf,
        train_labels: PathBuf,
        test_dir: PathBuf,
        test_labels: PathBuf,
    },
}

impl DataSource {
    pub fn load(&self) -> Result<(Dataset, Dataset)> {
        match self {
            DataSource::Synth(spec) => synth_blobs(spec),
            DataSource::Csv {
                train,
                test,
                height,
                width,
            } => Ok((
                load_csv_dataset(train, *height, *width)?,
                load_csv_dataset(test, *height, *width)?,
            )),
            DataSource::Pgm {
                train_dir,
                train_labels,
                test_dir,
                test_labels,
            } => Ok((
                load_pgm_dir(train_dir, train_labels)?,
                load_pgm_dir(test_dir, test_labels)?,
            )),
        }
    }
}

/// Tensor variant settings. `admm` falls back to the experiment-level params.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TensorVariant {
    pub dim1: usize,
    pub dim2: usize,
    pub mode3: Mode3Policy,
    pub application: Application,
    pub admm: Option<AdmmParams>,
}

impl Default for TensorVariant {
    fn default() -> Self {
        let base = TensorPcaConfig::default();
        Self {
            dim1: base.dim1,
            dim2: base.dim2,
            mode3: base.mode3,
            application: base.application,
            admm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Raw,
    Pca { dim: usize },
    Spca { dim: usize },
    TensorSpca(TensorVariant),
}

impl Variant {
    pub fn name(&self) -> String {
        match self {
            Variant::Raw => "raw".into(),
            Variant::Pca { dim } => format!("pca(d={dim})"),
            Variant::Spca { dim } => format!("spca(d={dim})"),
            Variant::TensorSpca(t) => {
                let mode3 = match t.mode3 {
                    Mode3Policy::Keep => "keep".to_string(),
                    Mode3Policy::Fixed(d) => d.to_string(),
                };
                let app = match t.application {
                    Application::PerSplit => "per-split",
                    Application::FitTransform => "fit-transform",
                };
                format!("tensor_spca({}x{},{mode3},{app})", t.dim1, t.dim2)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierSpec {
    #[serde(alias = "nearest_neighbor")]
    Nn,
    Krr(KrrParams),
}

impl ClassifierSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Nn => "nn",
            ClassifierSpec::Krr(_) => "krr",
        }
    }
}

/// ADMM settings used by the harness when the config has no `admm` key:
/// a light sparsity weight that does not zero out 1000-pixel loadings, and
/// fallbacks instead of hard failures so that large grids always finish.
pub fn harness_admm() -> AdmmParams {
    AdmmParams {
        lambda: Lambda::RelativeToRho(1e-3),
        on_failure: FailurePolicy::Fallback,
        ..AdmmParams::default()
    }
}

fn default_timing() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub variants: Vec<Variant>,
    pub classifiers: Vec<ClassifierSpec>,
    #[serde(default = "harness_admm")]
    pub admm: AdmmParams,
    /// Overrides the ADMM seed of every variant.
    #[serde(default)]
    pub seed: u64,
    /// TSV destination; nothing is written when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// When false the `seconds` column is written as 0 so reruns are byte-identical.
    #[serde(default = "default_timing")]
    pub timing: bool,
    #[serde(default)]
    pub execution: Execution,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.variants.is_empty() {
            return bad("at least one variant is required".into());
        }
        if self.classifiers.is_empty() {
            return bad("at least one classifier is required".into());
        }
        for v in &self.variants {
            match v {
                Variant::Pca { dim } | Variant::Spca { dim } if *dim == 0 => {
                    return bad(format!("{}: dim must be at least 1", v.name()));
                }
                Variant::TensorSpca(t) if t.dim1 == 0 || t.dim2 == 0 => {
                    return bad(format!("{}: dims must be at least 1", v.name()));
                }
                _ => {}
            }
        }
        self.admm.validate()
    }

    fn admm_for(&self, own: Option<AdmmParams>) -> AdmmParams {
        AdmmParams {
            seed: self.seed,
            ..own.unwrap_or(self.admm)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub variant: String,
    pub classifier: String,
    pub feature_dim: usize,
    pub report: EvalReport,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResults {
    pub rows: Vec<ResultRow>,
}

pub const TSV_HEADER: &str = "variant\tclassifier\taccuracy\tq_accuracy\tseconds";

impl ExperimentResults {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(TSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.variant, r.classifier, r.report.plain_accuracy, r.report.q_accuracy, r.seconds
            )
            .expect("writing to a String");
        }
        out
    }
}

struct Features {
    train: Matrix,
    train_labels: Vec<usize>,
    test: Matrix,
    test_labels: Vec<usize>,
    seconds: f64,
}

fn check_compatible(train: &Dataset, test: &Dataset) -> Result<()> {
    if train.image_dims() != test.image_dims() {
        return Err(Error::ShapeMismatch(format!(
            "train images are {:?}, test images are {:?}",
            train.image_dims(),
            test.image_dims()
        )));
    }
    Ok(())
}

/// One label per slab of a tensor reduced under `policy`.
pub fn reduced_labels(ds: &Dataset, policy: Mode3Policy) -> Result<Vec<usize>> {
    let out = output_partition(&ds.partition, policy)?;
    let mut labels = Vec::with_capacity(out.total());
    let mut start = 0;
    for (&n_in, &n_out) in ds.partition.counts().iter().zip(out.counts()) {
        labels.extend(std::iter::repeat_n(ds.labels[start], n_out));
        start += n_in;
    }
    Ok(labels)
}

/// Largest requested dim of each linear method, fitted once and truncated per variant.
struct SharedFits {
    pca: Option<(PcaModel, f64)>,
    spca: Option<(SparsePcaModel, f64)>,
}

fn shared_fits(cfg: &ExperimentConfig, train: &Matrix, exec: Execution) -> Result<SharedFits> {
    let max_dim = |pick: fn(&Variant) -> Option<usize>| cfg.variants.iter().filter_map(pick).max();
    let pca_dim = max_dim(|v| match v {
        Variant::Pca { dim } => Some(*dim),
        _ => None,
    });
    let spca_dim = max_dim(|v| match v {
        Variant::Spca { dim } => Some(*dim),
        _ => None,
    });
    let wrap = |name: &str, e: Error| Error::Variant {
        variant: name.to_string(),
        source: Box::new(e),
    };
    let pca = pca_dim
        .map(|d| {
            let t = Instant::now();
            let m = pca_fit(train, d).map_err(|e| wrap(&format!("pca(d={d})"), e))?;
            Ok::<_, Error>((m, t.elapsed().as_secs_f64()))
        })
        .transpose()?;
    let spca = spca_dim
        .map(|d| {
            let t = Instant::now();
            info!("fitting sparse PCA with {d} components");
            let m = fit_with(train, d, &cfg.admm_for(None), exec)
                .map_err(|e| wrap(&format!("spca(d={d})"), e))?;
            Ok::<_, Error>((m, t.elapsed().as_secs_f64()))
        })
        .transpose()?;
    Ok(SharedFits { pca, spca })
}

fn build_features(
    cfg: &ExperimentConfig,
    variant: &Variant,
    train: &Dataset,
    test: &Dataset,
    shared: &SharedFits,
    exec: Execution,
) -> Result<Features> {
    let start = Instant::now();
    let (train_x, test_x) = (train.features(), test.features());
    let plain = |a: Matrix, b: Matrix, extra: f64| Features {
        train: a,
        train_labels: train.labels.clone(),
        test: b,
        test_labels: test.labels.clone(),
        seconds: start.elapsed().as_secs_f64() + extra,
    };
    match variant {
        Variant::Raw => Ok(plain(train_x, test_x, 0.0)),
        Variant::Pca { dim } => {
            let (full, fit_secs) = shared.pca.as_ref().expect("pca fit exists");
            let m = full.truncate(*dim)?;
            let (a, b) = (m.transform(&train_x, exec)?, m.transform(&test_x, exec)?);
            Ok(plain(a, b, *fit_secs))
        }
        Variant::Spca { dim } => {
            let (full, fit_secs) = shared.spca.as_ref().expect("spca fit exists");
            let m = full.truncate(*dim)?;
            let (a, b) = (m.transform(&train_x, exec)?, m.transform(&test_x, exec)?);
            Ok(plain(a, b, *fit_secs))
        }
        Variant::TensorSpca(t) => {
            let tcfg = TensorPcaConfig {
                dim1: t.dim1,
                dim2: t.dim2,
                mode3: t.mode3,
                admm: cfg.admm_for(t.admm),
                application: t.application,
            };
            let (a, b) = reduce_split(
                (&train.tensor, &train.partition),
                (&test.tensor, &test.partition),
                &tcfg,
                exec,
            )?;
            Ok(Features {
                train: flatten_slabs(&a),
                train_labels: reduced_labels(train, t.mode3)?,
                test: flatten_slabs(&b),
                test_labels: reduced_labels(test, t.mode3)?,
                seconds: start.elapsed().as_secs_f64(),
            })
        }
    }
}

fn classify_cell(
    spec: &ClassifierSpec,
    f: &Features,
    n_classes: usize,
    exec: Execution,
) -> Result<(EvalReport, f64)> {
    let start = Instant::now();
    let train = LabeledFeatures::new(f.train.clone(), f.train_labels.clone(), n_classes)?;
    let predicted = match spec {
        ClassifierSpec::Nn => nn_classify_batch(&train, &f.test, exec)?,
        ClassifierSpec::Krr(params) => {
            let model = krr_fit(&train, params, exec)?;
            krr_predict_batch(&model, &f.test, exec)?
        }
    };
    let report = evaluate(&predicted, &f.test_labels, n_classes)?;
    Ok((report, start.elapsed().as_secs_f64()))
}

/// Runs the grid on already-loaded data. Rows come out in (variant, classifier)
/// config order.
pub fn run_on(cfg: &ExperimentConfig, train: &Dataset, test: &Dataset) -> Result<ExperimentResults> {
    cfg.validate()?;
    check_compatible(train, test)?;
    let exec = cfg.execution;
    let n_classes = train.n_classes().max(test.n_classes());
    let shared = shared_fits(cfg, &train.features(), exec)?;

    let features: Vec<Result<Features>> = exec.map_slice(&cfg.variants, |v| {
        info!("building features for {}", v.name());
        build_features(cfg, v, train, test, &shared, exec).map_err(|e| Error::Variant {
            variant: v.name(),
            source: Box::new(e),
        })
    });
    let features = features.into_iter().collect::<Result<Vec<_>>>()?;

    let cells: Vec<(usize, usize)> = (0..cfg.variants.len())
        .flat_map(|v| (0..cfg.classifiers.len()).map(move |c| (v, c)))
        .collect();
    let rows = exec.map_slice(&cells, |&(v, c)| {
        let variant = &cfg.variants[v];
        let spec = &cfg.classifiers[c];
        let f = &features[v];
        let (report, secs) = classify_cell(spec, f, n_classes, exec).map_err(|e| Error::Variant {
            variant: variant.name(),
            source: Box::new(e),
        })?;
        Ok(ResultRow {
            variant: variant.name(),
            classifier: spec.name().to_string(),
            feature_dim: f.train.cols(),
            report,
            seconds: if cfg.timing { f.seconds + secs } else { 0.0 },
        })
    });
    Ok(ExperimentResults {
        rows: rows.into_iter().collect::<Result<Vec<_>>>()?,
    })
}

/// Loads the data, runs the grid and writes the TSV if `output` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    let (train, test) = cfg.data.load()?;
    let results = run_on(cfg, &train, &test)?;
    if let Some(path) = &cfg.output {
        std::fs::write(path, results.to_tsv())?;
    }
    Ok(results)
}

/// The standard comparison grid: raw, PCA and sparse PCA at each `dims`, and the
/// default tensor variant, each with 1-NN and KRR.
pub fn table_grid(data: DataSource, dims: &[usize]) -> ExperimentConfig {
    let mut variants = Vec::new();
    for &dim in dims {
        variants.push(Variant::Pca { dim });
    }
    for &dim in dims {
        variants.push(Variant::Spca { dim });
    }
    variants.push(Variant::TensorSpca(TensorVariant::default()));
    variants.push(Variant::Raw);
    ExperimentConfig {
        data,
        variants,
        classifiers: vec![ClassifierSpec::Nn, ClassifierSpec::Krr(KrrParams::default())],
        admm: harness_admm(),
        seed: 0,
        output: None,
        timing: true,
        execution: Execution::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SynthSpec {
        SynthSpec {
            n_classes: 3,
            train_per_class: 3,
            test_per_class: 2,
            height: 4,
            width: 4,
            separation: 1.0,
            noise: 0.0,
            seed: 5,
        }
    }

    #[test]
    fn raw_nn_on_noiseless_data() {
        let cfg = ExperimentConfig {
            variants: vec![Variant::Raw],
            classifiers: vec![ClassifierSpec::Nn],
            ..table_grid(DataSource::Synth(tiny()), &[])
        };
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.rows.len(), 1);
        assert_eq!(res.rows[0].report.plain_accuracy, 1.0);
    }

    #[test]
    fn config_json() {
        let text = r#"{
            "data": {"synth": {"n_classes": 2, "train_per_class": 2, "test_per_class": 1,
                               "height": 3, "width": 3, "separation": 1.0, "noise": 0.1, "seed": 1}},
            "variants": ["raw", {"pca": {"dim": 2}}, {"tensor_spca": {"dim1": 2, "mode3": {"fixed": 1}}}],
            "classifiers": ["nn", {"krr": {"sigma": "auto", "c": 0.01}}],
            "timing": false
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.admm, harness_admm());
        assert_eq!(cfg.variants[1], Variant::Pca { dim: 2 });
        match &cfg.variants[2] {
            Variant::TensorSpca(t) => {
                assert_eq!((t.dim1, t.dim2, t.mode3), (2, 25, Mode3Policy::Fixed(1)))
            }
            other => panic!("{other:?}"),
        }
        assert!(ExperimentConfig::from_json(r#"{"data": {"synth": {}}, "variants": [], "classifiers": ["nn"]}"#).is_err());
    }

    #[test]
    fn tsv_layout() {
        let cfg = ExperimentConfig {
            variants: vec![Variant::Raw, Variant::Pca { dim: 2 }],
            classifiers: vec![ClassifierSpec::Nn, ClassifierSpec::Krr(KrrParams::default())],
            timing: false,
            ..table_grid(DataSource::Synth(tiny()), &[])
        };
        let tsv = run_experiment(&cfg).unwrap().to_tsv();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[0], TSV_HEADER);
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("raw\tnn\t"));
        assert!(lines[4].starts_with("pca(d=2)\tkrr\t"));
        assert!(lines[1].ends_with("\t0"));
    }
}
