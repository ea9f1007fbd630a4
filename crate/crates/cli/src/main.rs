use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use nqk_core::data::{
    gamma, label_by_percentile, load_feature_csv, load_pgm, partition, LabelSource, Pipeline,
    PipelineSpec, ReduceKind, SyntheticKind,
};
use nqk_core::experiment::{
    boxplot_stats, init_params, load_dataset, read_fold_rows, run, summarize, DatasetSource,
    ExperimentConfig, ExperimentKind, TrainChoice,
};
use nqk_core::kernel::{
    cross_gram, gram, load_matrix, save_matrix, EmbeddingKind, EmbeddingSpec, MatrixFormat, Sidecar,
};
use nqk_core::reupload::{ExtendInit, QnnParams};
use nqk_core::svm::{solve_dual, BiasMode};
use nqk_core::train::{
    accuracy, qnn_accuracy, scale_qnn, train_qnn, BatchSize, EncodedSet, Preset,
};
use nqk_core::{ErrorKind, FeatureTable64};

/// Problems with flags or config files that the core library never sees.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "nqk", version, about = "Neural quantum kernel experiments")]
struct Cli {
    /// Base seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "nqk-out")]
    out: PathBuf,
    /// Worker threads (NQK_THREADS takes precedence). Results do not depend
    /// on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Experiment config, TOML or JSON by extension.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tile a mask into coverage labels, or normalize a feature table.
    Prep(PrepArgs),
    /// Train a classifier on the dataset.
    TrainQnn(TrainArgs),
    /// Train a single-qubit classifier and grow it qubit by qubit.
    ScaleQnn(ScaleArgs),
    /// Build an NQK Gram matrix (and optionally a test cross-matrix).
    Kernel(KernelArgs),
    /// Fit an SVM on a saved Gram matrix.
    Svm(SvmArgs),
    /// k-fold single-qubit QNN vs 1-to-n NQK.
    #[command(name = "kfold-1n")]
    Kfold1n(RunArgs),
    /// Repeated n-to-n scaling runs.
    ScaleNn(RunArgs),
    /// Classical SVC baselines on the same folds.
    Classical(RunArgs),
    /// Boxplot statistics of a folds.csv.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DataKind {
    Blobs,
    Circles,
    Moons,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Optimal,
    Suboptimal,
    Scaling,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReduceArg {
    Pca,
    Svd,
}

#[derive(Clone, Copy, ValueEnum)]
enum BiasArg {
    Zero,
    Fitted,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmbedArg {
    OneToN,
    NToN,
}

/// Flag overrides applied on top of the config file.
#[derive(Args, Default)]
struct Overrides {
    /// Feature CSV (`id,f0..,label` or with a `gamma` column).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Label the CSV from its `gamma` column at this percentile.
    #[arg(long)]
    gamma_percentile: Option<f64>,
    /// Synthetic dataset instead of a CSV.
    #[arg(long, conflicts_with = "data")]
    synthetic: Option<DataKind>,
    /// Synthetic point count.
    #[arg(long)]
    points: Option<usize>,
    /// Synthetic noise level.
    #[arg(long)]
    noise: Option<f64>,
    /// Split file restricting the dataset.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long)]
    rebalance: bool,
    /// Features after reduction.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    reduce: Option<ReduceArg>,
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    preset: Option<PresetArg>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Mini-batch size, or `full`.
    #[arg(long)]
    batch: Option<String>,
    #[arg(long)]
    k_folds: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    n_train: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// SVM regularization.
    #[arg(long)]
    svm_c: Option<f64>,
    #[arg(long)]
    bias: Option<BiasArg>,
}

#[derive(Args)]
struct PrepArgs {
    #[command(flatten)]
    o: Overrides,
    /// Binary PGM mask; switches to tiling mode.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, default_value_t = 250)]
    tile: usize,
    /// Coverage percentile for the exclusion threshold.
    #[arg(long, default_value_t = 15.0)]
    percentile: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    o: Overrides,
    /// Input is already scaled to [-1, 1]; skip normalization.
    #[arg(long)]
    prepared: bool,
}

#[derive(Args)]
struct ScaleArgs {
    #[command(flatten)]
    o: Overrides,
    #[arg(long)]
    prepared: bool,
    /// Largest qubit count (defaults to the config's `n_qubits`).
    #[arg(long)]
    n_max: Option<usize>,
}

#[derive(Args)]
struct KernelArgs {
    #[command(flatten)]
    o: Overrides,
    #[arg(long)]
    prepared: bool,
    /// Trained parameters (JSON).
    #[arg(long)]
    params: PathBuf,
    #[arg(long, value_enum, default_value = "one-to-n")]
    embedding: EmbedArg,
    /// Test points for a cross-matrix.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Write binary matrices instead of CSV.
    #[arg(long)]
    binary: bool,
}

#[derive(Args)]
struct SvmArgs {
    #[command(flatten)]
    o: Overrides,
    /// Gram matrix with its `.json` sidecar.
    #[arg(long)]
    gram: PathBuf,
    /// Test-vs-train cross-matrix with its sidecar.
    #[arg(long)]
    cross: Option<PathBuf>,
    /// Labels for the cross-matrix rows, if not in the training data.
    #[arg(long)]
    test: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    o: Overrides,
}

#[derive(Args)]
struct StatsArgs {
    /// A folds.csv; without it, numbers are read one per line from stdin.
    #[arg(long)]
    input: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> anyhow::Result<ExperimentConfig> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    let cfg = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?
    };
    Ok(cfg)
}

fn apply(cfg: &mut ExperimentConfig, o: &Overrides, seed: Option<u64>) -> anyhow::Result<()> {
    if let Some(path) = &o.data {
        cfg.dataset = DatasetSource::Csv {
            path: path.clone(),
            gamma_percentile: o.gamma_percentile,
        };
    } else if o.gamma_percentile.is_some() {
        if let DatasetSource::Csv {
            gamma_percentile, ..
        } = &mut cfg.dataset
        {
            *gamma_percentile = o.gamma_percentile;
        }
    }
    if let Some(kind) = o.synthetic {
        let kind = match kind {
            DataKind::Blobs => SyntheticKind::Blobs,
            DataKind::Circles => SyntheticKind::Circles,
            DataKind::Moons => SyntheticKind::Moons,
        };
        cfg.dataset = match &cfg.dataset {
            DatasetSource::Synthetic { m, noise, seed, .. } => DatasetSource::Synthetic {
                kind,
                m: *m,
                noise: *noise,
                seed: *seed,
            },
            DatasetSource::Csv { .. } => DatasetSource::Synthetic {
                kind,
                m: 2000,
                noise: 0.05,
                seed: 0,
            },
        };
    }
    if let DatasetSource::Synthetic { m, noise, .. } = &mut cfg.dataset {
        *m = o.points.unwrap_or(*m);
        *noise = o.noise.unwrap_or(*noise);
    } else if o.points.is_some() || o.noise.is_some() {
        bail!(config_err(
            "--points and --noise apply to synthetic data only"
        ));
    }
    if let Some(s) = &o.split {
        cfg.split = Some(s.clone());
    }
    cfg.rebalance |= o.rebalance;
    cfg.p = o.p.unwrap_or(cfg.p);
    if let Some(r) = o.reduce {
        cfg.reduce = match r {
            ReduceArg::Pca => ReduceKind::Pca,
            ReduceArg::Svd => ReduceKind::TruncatedSvd,
        };
    }
    cfg.n_qubits = o.qubits.unwrap_or(cfg.n_qubits);
    cfg.n_layers = o.layers.unwrap_or(cfg.n_layers);
    if let Some(p) = o.preset {
        cfg.train = TrainChoice::Named(match p {
            PresetArg::Optimal => Preset::Optimal,
            PresetArg::Suboptimal => Preset::Suboptimal,
            PresetArg::Scaling => Preset::Scaling,
        });
    }
    if o.lr.is_some() || o.epochs.is_some() || o.batch.is_some() {
        let mut t = cfg.train.resolve();
        t.learning_rate = o.lr.unwrap_or(t.learning_rate);
        t.epochs = o.epochs.unwrap_or(t.epochs);
        if let Some(b) = &o.batch {
            t.batch_size = if b == "full" {
                BatchSize::Full
            } else {
                BatchSize::Size(
                    b.parse()
                        .map_err(|_| config_err(format!("bad --batch {b:?}")))?,
                )
            };
        }
        cfg.train = TrainChoice::Custom(t);
    }
    cfg.k_folds = o.k_folds.unwrap_or(cfg.k_folds);
    cfg.repeats = o.repeats.unwrap_or(cfg.repeats);
    cfg.n_train = o.n_train.unwrap_or(cfg.n_train);
    cfg.n_test = o.n_test.unwrap_or(cfg.n_test);
    cfg.svm.c = o.svm_c.unwrap_or(cfg.svm.c);
    if let Some(b) = o.bias {
        cfg.svm.bias = match b {
            BiasArg::Zero => BiasMode::Zero,
            BiasArg::Fitted => BiasMode::Fitted,
        };
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(())
}

/// The dataset, scaled with a pipeline fitted on it unless `prepared`.
fn scaled_data(
    cfg: &ExperimentConfig,
    prepared: bool,
) -> anyhow::Result<(FeatureTable64, Option<Pipeline<f64>>)> {
    let data = load_dataset::<f64>(cfg)?;
    if prepared {
        return Ok((data, None));
    }
    let reduce = (data.n_features() > cfg.p).then_some(cfg.reduce);
    let pipe = Pipeline::fit(&data, PipelineSpec { reduce, p: cfg.p })?;
    let scaled = pipe.apply(&data)?;
    Ok((scaled.table, Some(pipe)))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)
        .with_context(|| format!("writing {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn prep(a: &PrepArgs, cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<()> {
    if let Some(mask) = &a.mask {
        let m = load_pgm(mask)?;
        let tiling = partition(&m, a.tile)?;
        let gammas: Vec<f64> = tiling.tiles.iter().map(gamma).collect();
        let report = label_by_percentile(&gammas, a.percentile)?;
        let mut csv = String::from("tile,x,y,gamma,label\n");
        for (i, (g, l)) in gammas.iter().zip(&report.labels).enumerate() {
            let label = match l {
                nqk_core::data::TileLabel::Labeled(l) => l.sign().to_string(),
                nqk_core::data::TileLabel::Excluded => "excluded".into(),
            };
            let (x, y) = (i % tiling.tiles_x, i / tiling.tiles_x);
            csv.push_str(&format!("{i},{x},{y},{g},{label}\n"));
        }
        fs::write(out.join("tiles.csv"), csv)?;
        write_json(&out.join("labels.json"), &report)?;
        println!(
            "{} tiles: {} positive, {} negative, {} excluded (epsilon {})",
            gammas.len(),
            report.n_positive,
            report.n_negative,
            report.n_excluded,
            report.epsilon
        );
        return Ok(());
    }
    let (table, pipe) = scaled_data(cfg, false)?;
    let f = fs::File::create(out.join("features.csv"))?;
    table.write_csv(std::io::BufWriter::new(f))?;
    write_json(&out.join("pipeline.json"), &pipe)?;
    let (pos, neg) = table.class_counts();
    println!(
        "{} rows x {} features ({pos} positive, {neg} negative)",
        table.n_rows(),
        table.n_features()
    );
    Ok(())
}

fn train_cmd(a: &TrainArgs, cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<()> {
    let (table, _) = scaled_data(cfg, a.prepared)?;
    let set = EncodedSet::from_table(&table)?;
    let n = a.o.qubits.unwrap_or(1);
    let init = if n == 1 {
        init_params(cfg, 0)?
    } else {
        let mut p = QnnParams::zeros(n, cfg.n_layers)?;
        let one: QnnParams<f64> = init_params(cfg, 0)?;
        for l in 0..cfg.n_layers {
            for q in 0..n {
                let off = p.theta_offset(l, q);
                p.theta[off..off + 3].copy_from_slice(&one.theta[3 * l..3 * l + 3]);
            }
        }
        p.coupling = cfg.coupling;
        p
    };
    let tc = cfg.train.resolve().with_seed(cfg.seed);
    let hist = train_qnn(&init, &set, &tc)?;
    let acc = qnn_accuracy(&hist.best_params, &set)?;
    fs::write(out.join("params.json"), hist.best_params.to_json()?)?;
    write_json(&out.join("history.json"), &hist)?;
    println!(
        "{n} qubit(s), best cost {:.6}, training accuracy {:.4}",
        hist.best_cost, acc
    );
    Ok(())
}

fn scale_cmd(a: &ScaleArgs, cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<()> {
    let (table, _) = scaled_data(cfg, a.prepared)?;
    let set = EncodedSet::from_table(&table)?;
    let n_max = a.n_max.unwrap_or(cfg.n_qubits);
    let tc = cfg.train.resolve().with_seed(cfg.seed);
    let hist = scale_qnn(
        &init_params(cfg, 0)?,
        &set,
        n_max,
        &tc,
        ExtendInit::CopyFirst,
    )?;
    for (k, h) in hist.iter().enumerate() {
        fs::write(
            out.join(format!("params_n{}.json", k + 1)),
            h.best_params.to_json()?,
        )?;
        println!(
            "n={} best cost {:.6} accuracy {:.4}",
            k + 1,
            h.best_cost,
            qnn_accuracy(&h.best_params, &set)?
        );
    }
    let costs: Vec<f64> = hist.iter().map(|h| h.best_cost).collect();
    write_json(&out.join("costs.json"), &costs)?;
    Ok(())
}

fn kernel_cmd(a: &KernelArgs, cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<()> {
    let text =
        fs::read_to_string(&a.params).with_context(|| format!("reading {}", a.params.display()))?;
    let params = QnnParams::<f64>::from_json(&text)?;
    let (kind, n) = match a.embedding {
        EmbedArg::OneToN => (EmbeddingKind::OneToN, cfg.n_qubits),
        EmbedArg::NToN => (EmbeddingKind::NToN, params.n_qubits),
    };
    let spec = EmbeddingSpec::new(kind, params, n)?;
    let (train, pipe) = scaled_data(cfg, a.prepared)?;
    let train_set = EncodedSet::from_table(&train)?;
    let ext = if a.binary { "bin" } else { "csv" };
    let format = if a.binary {
        MatrixFormat::Binary
    } else {
        MatrixFormat::Csv
    };
    let g = gram(&spec, &train_set.points, train.ids())?;
    let meta = Sidecar {
        spec_hash: spec.hash(),
        format,
        rows: g.len(),
        cols: g.len(),
        point_ids: train.ids().to_vec(),
        column_ids: None,
        p: train.n_features(),
        n_qubits: n,
    };
    save_matrix(&out.join(format!("gram.{ext}")), &g.entries, &meta)?;
    println!(
        "Gram matrix {0}x{0}, min eigenvalue {1:.3e}",
        g.len(),
        g.min_eigenvalue()?
    );
    if let Some(test_path) = &a.test {
        let raw = load_feature_csv::<f64>(test_path, LabelSource::Column)?;
        let test = match &pipe {
            Some(p) => p.apply(&raw)?.table,
            None => raw,
        };
        let test_set = EncodedSet::from_table(&test)?;
        let cross = cross_gram(&spec, &train_set.points, &test_set.points)?;
        let meta = Sidecar {
            rows: test.n_rows(),
            point_ids: test.ids().to_vec(),
            column_ids: Some(train.ids().to_vec()),
            ..meta
        };
        save_matrix(&out.join(format!("cross.{ext}")), &cross, &meta)?;
        println!("cross matrix {}x{}", cross.rows(), cross.cols());
    }
    Ok(())
}

/// Labels of `ids`, looked up in `table`.
fn labels_for(
    table: &FeatureTable64,
    ids: &[String],
) -> anyhow::Result<Vec<nqk_core::data::Label>> {
    let index: std::collections::HashMap<&str, usize> = table
        .ids()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    ids.iter()
        .map(|id| {
            index
                .get(id.as_str())
                .map(|&i| table.labels()[i])
                .ok_or_else(|| nqk_core::Error::Data(format!("no label for point {id:?}")).into())
        })
        .collect()
}

fn svm_cmd(a: &SvmArgs, cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<()> {
    let (k, meta) = load_matrix::<f64>(&a.gram)?;
    let data = load_dataset::<f64>(cfg)?;
    let y = labels_for(&data, &meta.point_ids)?;
    let model = solve_dual(&k, &y, &meta.point_ids, &cfg.svm)?;
    fs::write(out.join("model.json"), model.to_json()?)?;
    let train_acc = accuracy(&model.predict_rows(&k)?, &y);
    println!(
        "{} support vectors, training accuracy {train_acc:.4}",
        model.n_support()
    );
    if let Some(cross) = &a.cross {
        let (kx, xmeta) = load_matrix::<f64>(cross)?;
        if xmeta.column_ids.as_ref() != Some(&meta.point_ids) {
            bail!(nqk_core::Error::Data(
                "cross-matrix columns do not match the Gram matrix points".into()
            ));
        }
        let label_table = match &a.test {
            Some(p) => load_feature_csv::<f64>(p, LabelSource::Column)?,
            None => data,
        };
        let yt = labels_for(&label_table, &xmeta.point_ids)?;
        let mut csv = String::from("id,decision,prediction,label\n");
        let mut pred = Vec::with_capacity(kx.rows());
        for (i, id) in xmeta.point_ids.iter().enumerate() {
            let d = model.decision_value(kx.row(i))?;
            let p = model.predict(kx.row(i))?;
            pred.push(p);
            csv.push_str(&format!("{id},{d},{},{}\n", p.sign(), yt[i].sign()));
        }
        fs::write(out.join("predictions.csv"), csv)?;
        println!("test accuracy {:.4}", accuracy(&pred, &yt));
    }
    Ok(())
}

fn run_cmd(kind: ExperimentKind, cfg: &mut ExperimentConfig, out: &Path) -> anyhow::Result<()> {
    cfg.kind = kind;
    cfg.validate()?;
    let data = load_dataset::<f64>(cfg)?;
    info!("{} points, {:?} run", data.n_rows(), kind);
    let bundle = run(cfg, &data)?;
    bundle.write(out)?;
    for m in &bundle.summary.models {
        println!(
            "{:<10} n={} train {:.4} ± {:.4}  test {:.4} ± {:.4}",
            m.model, m.n_qubits, m.train_mean, m.train_std, m.test_mean, m.test_std
        );
    }
    Ok(())
}

fn stats_cmd(a: &StatsArgs, out: &Path) -> anyhow::Result<()> {
    match &a.input {
        Some(path) => {
            let rows = read_fold_rows(fs::File::open(path)?)?;
            let models = summarize(&rows)?;
            write_json(&out.join("stats.json"), &models)?;
            for m in &models {
                println!(
                    "{:<10} n={} test median {:.4} [{:.4}, {:.4}] outliers {}",
                    m.model,
                    m.n_qubits,
                    m.test_box.median,
                    m.test_box.q25,
                    m.test_box.q75,
                    m.test_box.outliers.len()
                );
            }
        }
        None => {
            let text = std::io::read_to_string(std::io::stdin())?;
            let values = text
                .split_whitespace()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| nqk_core::Error::Data(format!("not a number: {s:?}")))
                })
                .collect::<Result<Vec<f64>, _>>()?;
            println!(
                "{}",
                serde_json::to_string_pretty(&boxplot_stats(&values)?)?
            );
        }
    }
    Ok(())
}

fn threads(flag: Option<usize>) -> anyhow::Result<Option<usize>> {
    match std::env::var("NQK_THREADS") {
        Ok(v) => v
            .parse()
            .map(Some)
            .map_err(|_| config_err(format!("NQK_THREADS={v:?} is not a count"))),
        Err(_) => Ok(flag),
    }
}

fn real_main(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = threads(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool")?;
    }
    let mut cfg = load_config(cli.config.as_deref())?;
    let overrides = match &cli.cmd {
        Cmd::Prep(a) => Some(&a.o),
        Cmd::TrainQnn(a) => Some(&a.o),
        Cmd::ScaleQnn(a) => Some(&a.o),
        Cmd::Kernel(a) => Some(&a.o),
        Cmd::Svm(a) => Some(&a.o),
        Cmd::Kfold1n(a) | Cmd::ScaleNn(a) | Cmd::Classical(a) => Some(&a.o),
        Cmd::Stats(_) => None,
    };
    if let Some(o) = overrides {
        apply(&mut cfg, o, cli.seed)?;
    }
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let out = cli.out.as_path();
    match &cli.cmd {
        Cmd::Prep(a) => prep(a, &cfg, out),
        Cmd::TrainQnn(a) => train_cmd(a, &cfg, out),
        Cmd::ScaleQnn(a) => scale_cmd(a, &cfg, out),
        Cmd::Kernel(a) => kernel_cmd(a, &cfg, out),
        Cmd::Svm(a) => svm_cmd(a, &cfg, out),
        Cmd::Kfold1n(_) => run_cmd(ExperimentKind::OneToN, &mut cfg, out),
        Cmd::ScaleNn(_) => run_cmd(ExperimentKind::NToN, &mut cfg, out),
        Cmd::Classical(_) => run_cmd(ExperimentKind::Classical, &mut cfg, out),
        Cmd::Stats(a) => stats_cmd(a, out),
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(core) = cause.downcast_ref::<nqk_core::Error>() {
            return match core.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numerical => 4,
            };
        }
        if cause.is::<ConfigError>() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Core errors already embed their source's message.
            let mut msg = String::new();
            for cause in e.chain() {
                let s = cause.to_string();
                if !msg.ends_with(&s) {
                    if !msg.is_empty() {
                        msg.push_str(": ");
                    }
                    msg.push_str(&s);
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}
