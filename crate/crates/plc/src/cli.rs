//! Command-line entry points. Each subcommand is a thin wrapper over the
//! library: read files, call the corresponding operation, write files.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 malformed file (magic/version/
//! truncation), 3 invalid configuration or input, 4 numerical failure.

use crate::augment::{augment_pipeline, TimeSeriesBatch};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{accuracy, clustering_accuracy, graph_agreement, pca2d, train_logistic, SplitSpec};
use crate::graph::{build_signed_graph, kmeans};
use crate::io;
use crate::optim;
use crate::stft::stft_tensorize;
use crate::synth::generate;
use crate::tensor::{DenseTensor, Matrix};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "plc", version, about = "Pseudo-Laplacian contrastive CP tensor decomposition")]
struct Cli {
    /// Bound worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-view dataset: x.plct, xt.plct, labels.csv.
    Synth {
        #[command(flatten)]
        config: ConfigArg,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// STFT-tensorize a raw time-series tensor [N, channels, timesteps].
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply the augmentation chain to a raw time-series tensor.
    Augment {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the joint decomposition on two tensor views.
    Fit {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        xt: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Omit wall-clock timings from metrics for byte-identical reruns.
        #[arg(long)]
        no_timings: bool,
    },
    /// Train and score the downstream logistic classifier on model features.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Unlabeled,train,test fractions, e.g. 0.7,0.15,0.15.
        #[arg(long)]
        split: Option<String>,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Compare model pseudo-labels against ground truth.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "true-labels")]
        true_labels: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Export a 2-D PCA projection of the model features as CSV.
    Export {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Label column source; pseudo-labels are used when omitted.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArg,
    },
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Format(_) => 2,
        Error::Config(_) | Error::Input(_) | Error::Dimension(_) | Error::Json(_) => 3,
        Error::Numerical(_) => 4,
        Error::Io(_) => 1,
    }
}

fn load_config(arg: &ConfigArg) -> Result<RunConfig> {
    match &arg.config {
        Some(path) => RunConfig::load(path),
        None => {
            let mut cfg = RunConfig::default();
            if let Ok(text) = std::env::var("PLC_SEED") {
                let seed: u64 = text
                    .parse()
                    .map_err(|_| Error::Config(format!("PLC_SEED is not an integer: {text:?}")))?;
                cfg.override_seeds(seed);
            }
            cfg.validate()?;
            Ok(cfg)
        }
    }
}

/// Read an order-3 raw tensor as a time-series batch.
fn read_raw_batch(path: &Path, sample_rate_hz: f64) -> Result<TimeSeriesBatch> {
    let t = read_order3(path)?;
    let dims = t.dims().to_vec();
    TimeSeriesBatch::new(dims[0], dims[1], dims[2], t.data().to_vec(), sample_rate_hz)
}

fn read_order3(path: &Path) -> Result<DenseTensor> {
    let t = io::read_tensor(path)?;
    if t.order() != 3 {
        return Err(Error::Config(format!(
            "{} has order {} but this step needs a raw time-series tensor of order 3 \
             [samples, channels, timesteps]; spectral tensors (order 4, e.g. from `synth` \
             or `preprocess`) are already tensorized",
            path.display(),
            t.order()
        )));
    }
    Ok(t)
}

fn batch_to_tensor(b: &TimeSeriesBatch) -> Result<DenseTensor> {
    DenseTensor::new(
        vec![b.n_samples, b.n_channels, b.n_timesteps],
        b.data.clone(),
    )
}

fn parse_split(text: &str, base: &SplitSpec) -> Result<SplitSpec> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "--split needs three comma-separated fractions, got {text:?}"
        )));
    }
    let mut vals = [0.0f64; 3];
    for (v, p) in vals.iter_mut().zip(parts.iter()) {
        *v = p
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("--split fraction {p:?} is not a number")))?;
    }
    let spec = SplitSpec {
        unlabeled: vals[0],
        train: vals[1],
        test: vals[2],
        seed: base.seed,
    };
    spec.validate()?;
    Ok(spec)
}

fn cmd_synth(config: &ConfigArg, out: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let data = generate(&cfg.synth)?;
    std::fs::create_dir_all(out)?;
    io::write_tensor(&out.join("x.plct"), &data.x)?;
    io::write_tensor(&out.join("xt.plct"), &data.x_aug)?;
    io::write_labels(&out.join("labels.csv"), &data.labels)?;
    println!(
        "wrote {} samples of {:?} to {}",
        data.x.dims()[0],
        &data.x.dims()[1..],
        out.display()
    );
    Ok(())
}

fn cmd_preprocess(input: &Path, config: &ConfigArg, out: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let batch = read_raw_batch(input, cfg.sample_rate_hz)?;
    let spec = stft_tensorize(&batch, &cfg.stft)?;
    io::write_tensor(out, &spec)?;
    println!("wrote spectral tensor {:?} to {}", spec.dims(), out.display());
    Ok(())
}

fn cmd_augment(input: &Path, config: &ConfigArg, out: &Path) -> Result<()> {
    let cfg = load_config(config)?;
    let batch = read_raw_batch(input, cfg.sample_rate_hz)?;
    let augmented = augment_pipeline(&batch, &cfg.augment)?;
    io::write_tensor(out, &batch_to_tensor(&augmented)?)?;
    println!("wrote augmented tensor to {}", out.display());
    Ok(())
}

fn cmd_fit(
    x_path: &Path,
    xt_path: &Path,
    config: &ConfigArg,
    out: &Path,
    metrics: Option<&Path>,
    no_timings: bool,
) -> Result<()> {
    let cfg = load_config(config)?;
    let x = io::read_tensor(x_path)?;
    let xt = io::read_tensor(xt_path)?;
    let result = optim::fit(&x, &xt, &cfg.hyperparams, cfg.clusters)?;
    io::write_model(out, &result.state.model, &result.state.w_aug)?;
    if let Some(mpath) = metrics {
        let mut m = io::MetricsFile {
            iterations: Some(result.state.loss_history.clone()),
            ..io::MetricsFile::default()
        };
        if !no_timings {
            m.seconds_per_iter = Some(result.seconds_per_iter.clone());
        }
        io::write_metrics(mpath, &m)?;
    }
    let last = result.state.loss_history.last();
    println!(
        "fit: {} outer iterations, converged={}, total loss {}",
        result.state.outer_iter,
        result.converged,
        last.map_or(f64::NAN, |r| r.total)
    );
    Ok(())
}

fn cmd_classify(
    model_path: &Path,
    labels_path: &Path,
    split_arg: Option<&str>,
    config: &ConfigArg,
    metrics: Option<&Path>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let (model, _w_aug) = io::read_model(model_path)?;
    let labels = io::read_labels(labels_path)?;
    let features = &model.weights;
    if labels.len() != features.rows() {
        return Err(Error::Input(format!(
            "{} labels vs {} feature rows",
            labels.len(),
            features.rows()
        )));
    }
    let split = match split_arg {
        Some(text) => parse_split(text, &cfg.split)?,
        None => cfg.split.clone(),
    };
    let (_, train_idx, test_idx) = split.split(labels.len())?;
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::Input("split leaves an empty train or test set".into()));
    }
    let gather = |idx: &[usize]| -> (Matrix, Vec<usize>) {
        let mut m = Matrix::zeros(idx.len(), features.cols());
        let mut l = Vec::with_capacity(idx.len());
        for (row, &i) in idx.iter().enumerate() {
            m.row_mut(row).copy_from_slice(features.row(i));
            l.push(labels[i]);
        }
        (m, l)
    };
    let (train_x, train_y) = gather(&train_idx);
    let (test_x, test_y) = gather(&test_idx);
    let clf = train_logistic(
        &train_x,
        &train_y,
        cfg.classifier.lr,
        cfg.classifier.epochs,
        cfg.classifier.l2,
        cfg.classifier.seed,
    )?;
    let acc = accuracy(&clf, &test_x, &test_y);
    if let Some(mpath) = metrics {
        io::write_metrics(
            mpath,
            &io::MetricsFile {
                accuracy: Some(acc),
                ..io::MetricsFile::default()
            },
        )?;
    }
    println!("classify: test accuracy {acc:.4} ({} train, {} test)", train_idx.len(), test_idx.len());
    Ok(())
}

fn cmd_eval(
    model_path: &Path,
    truth_path: &Path,
    config: &ConfigArg,
    metrics: Option<&Path>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let (model, _) = io::read_model(model_path)?;
    let truth = io::read_labels(truth_path)?;
    if truth.len() != model.weights.rows() {
        return Err(Error::Input(format!(
            "{} labels vs {} feature rows",
            truth.len(),
            model.weights.rows()
        )));
    }
    let k = {
        let mut sorted = truth.clone();
        sorted.sort_unstable();
        sorted.dedup();
        sorted.len()
    };
    if k < 2 {
        return Err(Error::Input("ground-truth labels have a single class".into()));
    }
    let pseudo = kmeans(&model.weights, k, cfg.hyperparams.seed)?;
    let agreement = graph_agreement(&build_signed_graph(&pseudo), &build_signed_graph(&truth))?;
    let clu_acc = clustering_accuracy(&pseudo, &truth)?;
    if let Some(mpath) = metrics {
        io::write_metrics(
            mpath,
            &io::MetricsFile {
                clustering_accuracy: Some(clu_acc),
                graph_agreement: Some(agreement),
                ..io::MetricsFile::default()
            },
        )?;
    }
    println!("eval: graph agreement {agreement:.4}, clustering accuracy {clu_acc:.4}");
    Ok(())
}

fn cmd_export(
    model_path: &Path,
    out: &Path,
    labels_path: Option<&Path>,
    config: &ConfigArg,
) -> Result<()> {
    let cfg = load_config(config)?;
    let (model, _) = io::read_model(model_path)?;
    let labels = match labels_path {
        Some(p) => {
            let l = io::read_labels(p)?;
            if l.len() != model.weights.rows() {
                return Err(Error::Input(format!(
                    "{} labels vs {} feature rows",
                    l.len(),
                    model.weights.rows()
                )));
            }
            l
        }
        None => kmeans(&model.weights, cfg.clusters, cfg.hyperparams.seed)?,
    };
    let projection = pca2d(&model.weights)?;
    io::write_projection_csv(out, &projection, &labels)?;
    println!("wrote projection of {} samples to {}", labels.len(), out.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        // ignore failure when a pool already exists (e.g. repeated calls in tests)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Synth { config, out } => cmd_synth(config, out),
        Command::Preprocess { input, config, out } => cmd_preprocess(input, config, out),
        Command::Augment { input, config, out } => cmd_augment(input, config, out),
        Command::Fit {
            x,
            xt,
            config,
            out,
            metrics,
            no_timings,
        } => cmd_fit(x, xt, config, out, metrics.as_deref(), *no_timings),
        Command::Classify {
            model,
            labels,
            split,
            config,
            metrics,
        } => cmd_classify(model, labels, split.as_deref(), config, metrics.as_deref()),
        Command::Eval {
            model,
            true_labels,
            config,
            metrics,
        } => cmd_eval(model, true_labels, config, metrics.as_deref()),
        Command::Export {
            model,
            out,
            labels,
            config,
        } => cmd_export(model, out, labels.as_deref(), config),
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
