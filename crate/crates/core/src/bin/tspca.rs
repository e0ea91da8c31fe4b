use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use tensor_spca::admm::{AdmmParams, FailurePolicy, Lambda, Rho};
use tensor_spca::classify::{krr_fit, krr_predict_batch, nn_classify_batch, KrrParams, Sigma};
use tensor_spca::dataset::{self, load_csv_dataset, read_labeled_csv, write_labeled_csv, Dataset, SynthSpec};
use tensor_spca::experiment::{reduced_labels, run_experiment, ExperimentConfig};
use tensor_spca::metrics::evaluate;
use tensor_spca::par::Execution;
use tensor_spca::persist::{self, StoredModel};
use tensor_spca::tensor::flatten_slabs;
use tensor_spca::tensor_pipeline::{
    reduce_split, tensor_sparse_pca_with, Application, Mode3Policy, TensorPcaConfig,
};
use tensor_spca::{pca_fit, Error, LabeledFeatures, Result, Tensor3};

#[derive(Parser)]
#[command(name = "tspca", version, about = "Sparse PCA, tensor sparse PCA and face-recognition experiments")]
struct Cli {
    /// Run every loop on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Pca,
    Spca,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassifierArg {
    Nn,
    Krr,
}

#[derive(Clone, Copy, ValueEnum)]
enum ApplyArg {
    PerSplit,
    FitTransform,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnFailure {
    Error,
    Fallback,
}

#[derive(clap::Args, Clone)]
struct AdmmArgs {
    /// Absolute sparsity weight; defaults to 0.01·rho.
    #[arg(long)]
    lambda: Option<f64>,
    /// Penalty parameter: `auto` or a positive number.
    #[arg(long, default_value = "auto", value_parser = parse_rho)]
    rho: Rho,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, value_enum, default_value = "error")]
    on_failure: OnFailure,
}

impl AdmmArgs {
    fn params(&self) -> AdmmParams {
        AdmmParams {
            rho: self.rho,
            lambda: self.lambda.map_or(Lambda::default(), Lambda::Absolute),
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
            on_failure: match self.on_failure {
                OnFailure::Error => FailurePolicy::Error,
                OnFailure::Fallback => FailurePolicy::Fallback,
            },
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit a PCA or sparse PCA model on a `label,v1,...,vq` CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        dim: usize,
        #[command(flatten)]
        admm: AdmmArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Project a CSV with a saved model; labels are passed through.
    Transform {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tensor sparse PCA of image CSVs; writes `<prefix>train.csv` and `<prefix>test.csv`.
    TensorReduce {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        height: usize,
        #[arg(long)]
        width: usize,
        #[arg(long, default_value_t = 25)]
        dim1: usize,
        #[arg(long, default_value_t = 25)]
        dim2: usize,
        /// `keep` or a per-person dimension.
        #[arg(long, default_value = "keep", value_parser = parse_mode3)]
        mode3: Mode3Policy,
        #[arg(long, value_enum, default_value = "per-split")]
        apply: ApplyArg,
        #[command(flatten)]
        admm: AdmmArgs,
        #[arg(long)]
        out_prefix: String,
    },
    /// Train on one CSV, predict another, and write a JSON report.
    Classify {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, value_enum)]
        classifier: ClassifierArg,
        /// RBF width: `auto` or a positive number.
        #[arg(long, default_value = "auto", value_parser = parse_sigma)]
        sigma: Sigma,
        #[arg(long, default_value_t = 1e-3)]
        c: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a JSON-configured experiment grid; prints the TSV table.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate seeded synthetic image datasets; writes `<prefix>train.csv` and `<prefix>test.csv`.
    Synth {
        #[arg(long, default_value_t = 15)]
        classes: usize,
        #[arg(long, default_value_t = 8)]
        train_per_class: usize,
        #[arg(long, default_value_t = 3)]
        test_per_class: usize,
        #[arg(long, default_value_t = 32)]
        height: usize,
        #[arg(long, default_value_t = 32)]
        width: usize,
        #[arg(long, default_value_t = 1.0)]
        separation: f64,
        #[arg(long, default_value_t = 0.5)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_prefix: String,
    },
}

fn parse_rho(s: &str) -> std::result::Result<Rho, String> {
    if s == "auto" {
        return Ok(Rho::Auto);
    }
    s.parse().map(Rho::Fixed).map_err(|_| format!("expected `auto` or a number, got {s:?}"))
}

fn parse_sigma(s: &str) -> std::result::Result<Sigma, String> {
    if s == "auto" {
        return Ok(Sigma::AutoMedian);
    }
    s.parse().map(Sigma::Fixed).map_err(|_| format!("expected `auto` or a number, got {s:?}"))
}

fn parse_mode3(s: &str) -> std::result::Result<Mode3Policy, String> {
    if s == "keep" {
        return Ok(Mode3Policy::Keep);
    }
    s.parse()
        .map(Mode3Policy::Fixed)
        .map_err(|_| format!("expected `keep` or a positive integer, got {s:?}"))
}

fn prefixed(prefix: &str, name: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}{name}"))
}

/// Flattened reduced slabs with one label per output slab.
fn write_reduced(path: &Path, ds: &Dataset, reduced: &Tensor3, mode3: Mode3Policy) -> Result<()> {
    write_labeled_csv(path, &flatten_slabs(reduced), &reduced_labels(ds, mode3)?)
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Fit {
            input,
            method,
            dim,
            admm,
            out,
        } => {
            let data = read_labeled_csv(&input)?;
            let model = match method {
                Method::Pca => StoredModel::Pca(pca_fit(&data.features, dim)?),
                Method::Spca => {
                    let m = tensor_spca::spca::fit_with(&data.features, dim, &admm.params(), exec)?;
                    let nnz: Vec<usize> = m.components.iter().map(|c| c.nonzeros).collect();
                    log::info!("nonzeros per component: {nnz:?}");
                    StoredModel::Sparse(m)
                }
            };
            persist::save(&out, &model)
        }
        Command::Transform { model, input, out } => {
            let model = persist::load(&model)?;
            let data = read_labeled_csv(&input)?;
            let projected = match &model {
                StoredModel::Sparse(m) => m.transform(&data.features, exec)?,
                StoredModel::Pca(m) => m.transform(&data.features, exec)?,
            };
            write_labeled_csv(&out, &projected, &data.labels)
        }
        Command::TensorReduce {
            train,
            test,
            height,
            width,
            dim1,
            dim2,
            mode3,
            apply,
            admm,
            out_prefix,
        } => {
            let cfg = TensorPcaConfig {
                dim1,
                dim2,
                mode3,
                admm: admm.params(),
                application: match apply {
                    ApplyArg::PerSplit => Application::PerSplit,
                    ApplyArg::FitTransform => Application::FitTransform,
                },
            };
            let train_ds = load_csv_dataset(&train, height, width)?;
            match test {
                Some(test) => {
                    let test_ds = load_csv_dataset(&test, height, width)?;
                    let (a, b) = reduce_split(
                        (&train_ds.tensor, &train_ds.partition),
                        (&test_ds.tensor, &test_ds.partition),
                        &cfg,
                        exec,
                    )?;
                    write_reduced(&prefixed(&out_prefix, "train.csv"), &train_ds, &a, mode3)?;
                    write_reduced(&prefixed(&out_prefix, "test.csv"), &test_ds, &b, mode3)
                }
                None => {
                    if matches!(apply, ApplyArg::FitTransform) {
                        return Err(Error::InvalidParameter(
                            "--apply fit-transform needs --test".into(),
                        ));
                    }
                    let (a, _) = tensor_sparse_pca_with(&train_ds.tensor, &train_ds.partition, &cfg, exec)?;
                    write_reduced(&prefixed(&out_prefix, "train.csv"), &train_ds, &a, mode3)
                }
            }
        }
        Command::Classify {
            train,
            test,
            classifier,
            sigma,
            c,
            out,
        } => {
            let train = read_labeled_csv(&train)?;
            let test = read_labeled_csv(&test)?;
            let n_classes = train.n_classes.max(test.n_classes);
            let train = LabeledFeatures::new(train.features, train.labels, n_classes)?;
            let (name, predicted, sigma_used) = match classifier {
                ClassifierArg::Nn => ("nn", nn_classify_batch(&train, &test.features, exec)?, None),
                ClassifierArg::Krr => {
                    let model = krr_fit(&train, &KrrParams { sigma, c }, exec)?;
                    let p = krr_predict_batch(&model, &test.features, exec)?;
                    ("krr", p, Some(model.sigma))
                }
            };
            let report = evaluate(&predicted, &test.labels, n_classes)?;
            let doc = json!({
                "classifier": name,
                "sigma": sigma_used,
                "report": report,
                "predictions": predicted,
            });
            std::fs::write(&out, serde_json::to_string_pretty(&doc)? + "\n")?;
            Ok(())
        }
        Command::Experiment { config } => {
            let text = std::fs::read_to_string(&config)?;
            let mut cfg = ExperimentConfig::from_json(&text)?;
            if cli.sequential {
                cfg.execution = Execution::Sequential;
            }
            let results = run_experiment(&cfg)?;
            print!("{}", results.to_tsv());
            Ok(())
        }
        Command::Synth {
            classes,
            train_per_class,
            test_per_class,
            height,
            width,
            separation,
            noise,
            seed,
            out_prefix,
        } => {
            let spec = SynthSpec {
                n_classes: classes,
                train_per_class,
                test_per_class,
                height,
                width,
                separation,
                noise,
                seed,
            };
            let (train, test) = dataset::synth_blobs(&spec)?;
            dataset::save_csv_dataset(prefixed(&out_prefix, "train.csv"), &train)?;
            dataset::save_csv_dataset(prefixed(&out_prefix, "test.csv"), &test)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let doc = json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{doc}");
            ExitCode::from(1)
        }
    }
}
